#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lqe/augment.hpp"
#include "lqe/config.hpp"
#include "lqe/dataset.hpp"
#include "lqe/metrics.hpp"
#include "lqe/model.hpp"

namespace lqe {

/// Raw loss components averaged over a batch, plus the weights used to combine them.
struct LossBreakdown {
  double edl = 0.0;
  double div = 0.0;
  double lb = 0.0;
  double spent = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double eta = 0.0;
  double total = 0.0;

  double edl_data = 0.0;  // mean sum_k BCE
  double kl = 0.0;        // mean sum_k KL, unweighted
  double kl_term = 0.0;   // lambda * kl
  double lambda = 0.0;
  bool zero_norm_query = false;

  double div_contribution() const noexcept { return beta * div; }
  double lb_contribution() const noexcept { return gamma * lb; }
  double spent_contribution() const noexcept { return eta * spent; }
};

/// Combines per-sample outputs into
///   L = mean_b(L_EDL) + beta * mean_b(L_div) + gamma * L_lb + eta * mean_b(L_spent)
/// where L_lb is taken over the batch of pooling weights and L_spent is
/// included only when cfg.entropy_penalty is set. When `upstream` is given
/// it receives d L / d(model outputs) for each sample.
LossBreakdown total_loss(std::span<const ModelOutput> outputs, std::span<const OrdinalTargets> targets,
                         double t_epoch, const TrainConfig& cfg,
                         std::vector<ModelUpstream>* upstream = nullptr);

/// Linear warmup from 0 over warmup_epochs, then cosine decay to 1% of cfg.lr
/// at the final step of cfg.epochs.
double learning_rate(std::int64_t step, std::int64_t steps_per_epoch, const TrainConfig& cfg);

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t steps = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One AdamW update with decoupled weight decay on matrices (rank >= 2).
/// Returns false and leaves everything untouched when a gradient is not finite.
bool adamw_update(ParamSet& params, AdamState& opt, const Gradients& grads, double lr, double weight_decay);

/// shadow <- decay * shadow + (1 - decay) * params.
void ema_update(std::vector<Tensor>& shadow, const ParamSet& params, double decay);

struct TrainState {
  explicit TrainState(const ModelConfig& cfg);
  TrainState(TrainState&&) = default;

  ParamSet params;
  Model model;
  AdamState adam;
  std::vector<Tensor> ema;
  std::int64_t ema_updates = 0;
  int epoch = 0;  // completed epochs
  std::int64_t step = 0;
  double best_val_qwk = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<Tensor> best_ema;
  std::string best_checkpoint_path;
  int patience_counter = 0;
  std::vector<std::string> incidents;

  /// Copy of the parameter set holding the EMA shadow values.
  ParamSet ema_params() const;
  ParamSet best_params() const;
};

/// Applies the configured optimizer step at `step` (learning rate from the
/// schedule). Non-finite gradients skip the update and append an incident.
bool optimizer_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg, std::int64_t step,
                    std::int64_t steps_per_epoch);

struct TrainSample {
  Image image;
  OrdinalTargets targets;
  std::string id;
};

/// Per-image photometric augmentation followed, with probability mix_prob,
/// by batch-wide MixUp or CutMix (one lambda per batch, partners are the
/// batch rotated by a random offset). Deterministic in (seed, epoch, indices).
std::vector<TrainSample> prepare_batch(std::span<const LabeledImage> items, std::span<const std::size_t> indices,
                                       const TrainConfig& cfg, int epoch, std::int64_t step);

/// Training samples without augmentation or mixing.
std::vector<TrainSample> plain_batch(std::span<const LabeledImage> items, int num_classes);

struct Workspace {
  std::vector<ModelCache> caches;
  std::vector<Gradients> per_sample;
};

struct BatchResult {
  LossBreakdown loss;
  std::vector<ModelOutput> outputs;
};

/// Forward every sample, assemble the total loss and, when `grads` is
/// given, accumulate its gradient (already averaged) into `grads`. Query
/// dropout is active iff `dropout_key` is non-null; each sample draws from
/// dropout_key->split(i). Parallel over samples with a fixed reduction order.
BatchResult forward_backward(const Model& model, const ParamSet& params, std::span<const TrainSample> batch,
                             const TrainConfig& cfg, double t_epoch, Gradients* grads,
                             const Rng* dropout_key = nullptr, Workspace* ws = nullptr);

struct EvalResult {
  EvalReport report;
  std::vector<SampleLog> logs;
};

/// Evaluates `params` on `items`. With tta the decoded class distributions,
/// exceedance probabilities, strengths and u_mean are averaged over the
/// identity, horizontal, vertical and double flip.
EvalResult evaluate(const Model& model, const ParamSet& params, std::span<const LabeledImage> items, bool tta,
                    Readout readout = Readout::kArgmax);

struct HistoryRow {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double edl = 0.0;
  double div = 0.0;
  double lb = 0.0;
  double spent = 0.0;
  double val_acc = 0.0;
  double val_qwk = 0.0;
  double val_u_mean = 0.0;
  double lr = 0.0;
  double lambda = 0.0;
  double kl_term = 0.0;
  double best_val_qwk = 0.0;
  double mean_query_cosine = 0.0;
  int skipped_steps = 0;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

std::string history_csv_header();
std::string history_csv_row(const HistoryRow& row);
std::string history_csv(std::span<const HistoryRow> rows);

struct TrainOptions {
  /// When set, best.ckpt, last.ckpt and history.csv are written here.
  std::filesystem::path output_dir;
  /// 0 runs every batch of every epoch.
  int max_steps_per_epoch = 0;
  /// Ends the run after this many epochs while keeping the schedule of
  /// cfg.epochs; 0 runs them all.
  int stop_after_epochs = 0;
  std::function<void(const HistoryRow&, const TrainState&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<HistoryRow> history;
  bool early_stopped = false;
};

/// Records one validation score: a strict improvement resets the patience
/// counter and marks the epoch as best, anything else increments the counter.
/// Returns true on improvement.
bool record_validation(TrainState& state, double val_qwk, int epoch);

/// True once the patience counter has reached early_stop_patience.
bool should_stop_early(const TrainState& state, const TrainConfig& cfg);

/// Full loop: augment, forward, total_loss, backward, optimizer_step,
/// ema_update per batch; EMA weights evaluated on val each epoch; best
/// checkpoint on strictly improved val QWK; early stop once the patience
/// counter reaches early_stop_patience. Throws InvalidInput on an empty
/// train or val split.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const TrainOptions& opts = {});

/// Mean off-diagonal cosine between the final query vectors, averaged over items.
double mean_query_cosine(const Model& model, const ParamSet& params, std::span<const LabeledImage> items);
/// Load-balance loss of the pooling weights over all items.
double dataset_load_balance(const Model& model, const ParamSet& params, std::span<const LabeledImage> items);

/// Checkpoint with "model/" (EMA weights), "raw/", "adam_m/", "adam_v/" and JSON metadata.
void save_checkpoint(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg,
                     const std::vector<Tensor>& model_weights);

struct LoadedModel {
  TrainConfig config;
  TrainState state;  // params hold the "model/" weights
  int epoch = 0;
  double best_val_qwk = 0.0;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

/// make_synthetic with the config's seed and class count, or load_dataset on cfg.data_dir.
Dataset dataset_for(const TrainConfig& cfg);

}  // namespace lqe
