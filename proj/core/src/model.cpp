#include "lqe/model.hpp"

#include "lqe/error.hpp"

namespace lqe {

void ModelConfig::validate() const {
  backbone.validate();
  lqap.validate();
  if (stage < 1 || stage > kNumStages) throw InvalidInput("stage must be in 1..4");
  if (num_classes < 2) throw InvalidInput("num_classes must be >= 2");
}

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Model::Model(const ModelConfig& cfg, ParamSet& params)
    : cfg_(validated(cfg)),
      backbone_(cfg.backbone, params),
      tokenizer_(cfg.backbone.widths[cfg.stage - 1], cfg.lqap.dim, params),
      lqap_(cfg.lqap, params),
      head_(cfg.lqap.dim, cfg.num_classes, params) {}

void Model::initialize(ParamSet& params, std::uint64_t seed) const {
  const Rng root(seed);
  Rng r1 = root.split(1), r2 = root.split(2), r3 = root.split(3), r4 = root.split(4);
  backbone_.initialize(params, r1);
  tokenizer_.initialize(params, r2);
  lqap_.initialize(params, r3);
  head_.initialize(params, r4);
}

ModelOutput Model::forward(const Image& img, const ParamSet& params, ModelCache* cache,
                           Rng* dropout_rng) const {
  std::vector<FeatureMap> maps =
      backbone_.forward(img, params, cfg_.stage, cache ? &cache->backbone : nullptr);
  const FeatureMap& fm = select_stage(maps, cfg_.stage);
  const TokenSet tokens = tokenizer_.tokenize(fm, params);
  ModelOutput out;
  out.attention = lqap_.attend(tokens.tokens, params, cache ? &cache->lqap : nullptr, dropout_rng);
  out.evidential = head_.forward(out.attention.pooled, params, cache ? &cache->head : nullptr);
  out.probs = decode(out.evidential.pi_hat);
  out.grade = predict_grade(out.probs);
  if (cache) cache->stage_map = fm;
  return out;
}

void Model::backward(const ModelUpstream& up, const ModelCache& cache, const ParamSet& params,
                     Gradients& grads) const {
  LqapUpstream lu;
  lu.d_pooled = head_.backward(up.d_evidence, cache.head, params, grads);
  lu.d_final_queries = up.d_final_queries;
  lu.d_weights = up.d_weights;
  lu.d_maps = up.d_maps;
  const Tensor d_tokens = lqap_.backward(lu, cache.lqap, params, grads);
  const Tensor d_map = tokenizer_.backward(d_tokens, cache.stage_map, params, grads);
  backbone_.backward(d_map, cfg_.stage, cache.backbone, params, grads);
}

}  // namespace lqe
