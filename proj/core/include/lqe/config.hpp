#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "lqe/augment.hpp"
#include "lqe/model.hpp"
#include "lqe/synthetic.hpp"

namespace lqe {

enum class Readout { kArgmax, kThresholdCount };

struct TrainConfig {
  int epochs = 60;
  int batch_size = 16;
  double lr = 3e-4;
  double weight_decay = 0.05;
  double warmup_epochs = 3.0;

  double beta = 0.1;   // diversity weight
  double gamma = 0.01; // load-balance weight
  double eta = 0.01;   // spatial-entropy weight, used only when entropy_penalty is on
  bool entropy_penalty = false;
  double entropy_low = 0.15;   // h_min as a fraction of ln M
  double entropy_high = 0.85;  // h_max as a fraction of ln M
  double diversity_margin = 0.0;

  double lambda_max = 0.1;
  double t_anneal = 10.0;
  bool anneal = true;  // false holds lambda at lambda_max from the first step

  double ema_decay = 0.999;
  bool ema_warmup = true;
  int early_stop_patience = 10;
  std::uint64_t seed = 0;
  bool tta_enabled = true;  // final evaluation
  bool val_tta = false;     // per-epoch model selection
  Readout readout = Readout::kArgmax;

  int num_classes = 5;
  int stage_select = 2;
  int num_queries = 8;
  int input_side = 128;
  int backbone_width = 32;
  int backbone_depth = 1;
  int query_dim = 64;
  int decoder_depth = 2;
  double temperature = 0.5;
  double temperature_end = 0.0;  // > 0 enables a linear per-epoch schedule
  double query_dropout = 0.1;

  bool augment_enabled = true;
  AugmentConfig augment;

  std::string data_dir;  // empty: generate the synthetic dataset below
  SyntheticSpec synthetic;

  /// Throws InvalidInput on out-of-range values.
  void validate() const;
  ModelConfig model_config() const;
};

/// Applies one `key=value` (or separate key/value) assignment. Throws
/// InvalidInput for unknown keys or unparsable values.
void set_config_value(TrainConfig& cfg, std::string_view key, std::string_view value);

/// Flat `key = value` lines; `#` starts a comment. Later keys win.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Every key in a stable order, formatted so parse_config reads it back exactly.
std::string dump_config(const TrainConfig& cfg);
std::map<std::string, std::string> config_entries(const TrainConfig& cfg);

}  // namespace lqe
