#pragma once

#include <vector>

#include "lqe/backbone.hpp"
#include "lqe/evidential.hpp"
#include "lqe/image.hpp"
#include "lqe/lqap.hpp"
#include "lqe/ordinal.hpp"

namespace lqe {

struct ModelConfig {
  BackboneConfig backbone;
  int stage = 2;  // backbone stage whose tokens are queried
  LqapConfig lqap;
  int num_classes = 5;

  void validate() const;
};

struct ModelOutput {
  EvidentialOutput evidential;
  AttentionRecord attention;
  ClassDistribution probs;
  int grade = 0;
};

struct ModelCache {
  BackboneCache backbone;
  FeatureMap stage_map;
  LqapCache lqap;
  EvidenceHead::Cache head;
};

/// Gradients of the training objective w.r.t. the model's loss-facing outputs.
struct ModelUpstream {
  std::vector<double> d_evidence;   // 2(K-1)
  Tensor d_final_queries;           // [N x D] or empty
  std::vector<double> d_weights;    // [N] or empty
  Tensor d_maps;                    // [N x M] or empty
};

/// Backbone -> tokenizer -> LQAP -> evidential head.
class Model {
 public:
  Model(const ModelConfig& cfg, ParamSet& params);

  void initialize(ParamSet& params, std::uint64_t seed) const;

  ModelOutput forward(const Image& img, const ParamSet& params, ModelCache* cache = nullptr,
                      Rng* dropout_rng = nullptr) const;
  void backward(const ModelUpstream& upstream, const ModelCache& cache, const ParamSet& params,
                Gradients& grads) const;

  const ModelConfig& config() const noexcept { return cfg_; }
  void set_temperature(double temperature) {
    lqap_.set_temperature(temperature);
    cfg_.lqap.temperature = temperature;
  }
  const Backbone& backbone() const noexcept { return backbone_; }
  const Tokenizer& tokenizer() const noexcept { return tokenizer_; }
  const Lqap& lqap() const noexcept { return lqap_; }
  const EvidenceHead& head() const noexcept { return head_; }
  int stage_side() const { return backbone_.stage_side(cfg_.stage); }
  int num_tokens() const { return stage_side() * stage_side(); }

 private:
  ModelConfig cfg_;
  Backbone backbone_;
  Tokenizer tokenizer_;
  Lqap lqap_;
  EvidenceHead head_;
};

}  // namespace lqe
