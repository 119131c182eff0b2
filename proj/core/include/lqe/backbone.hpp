#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lqe/image.hpp"
#include "lqe/layers.hpp"
#include "lqe/rng.hpp"
#include "lqe/tensor.hpp"

namespace lqe {

inline constexpr int kNumStages = 4;
/// Input pixels per feature cell at the output of each stage.
inline constexpr std::array<int, kNumStages> kStageStrides{4, 8, 16, 32};

/// Four-stage convolutional stand-in: a 4x4 patchify stem, then per stage a
/// 2x2 strided downsample (except stage 1) followed by residual blocks of
/// depthwise conv -> LayerNorm -> pointwise expand -> GELU -> pointwise project.
struct BackboneConfig {
  int input_side = 128;
  int in_channels = 3;
  std::array<int, kNumStages> widths{32, 64, 128, 256};
  std::array<int, kNumStages> depths{1, 1, 1, 1};
  int kernel = 7;
  int mlp_ratio = 2;

  void validate() const;
};

struct FeatureMap {
  Tensor values;  // [side*side x channels]
  int side = 0;
  int channels = 0;
  int stage = 0;   // 1-based
  int stride = 0;
};

struct BlockCache {
  Tensor input;
  Tensor dw_out;
  LayerNormCache ln;
  Tensor ln_out;
  Tensor pw1_out;
  Tensor act;
};

struct StageCache {
  Tensor patches;     // input to the stem / downsample linear
  Tensor pre_norm;    // stem only: linear output before the stem LayerNorm
  LayerNormCache ln;  // stem LayerNorm or downsample LayerNorm
  std::vector<BlockCache> blocks;
};

struct BackboneCache {
  std::uint64_t param_version = 0;
  int last_stage = 0;
  std::array<StageCache, kNumStages> stages;
};

class Backbone {
 public:
  /// Registers every backbone tensor under "backbone." in `params`.
  Backbone(const BackboneConfig& cfg, ParamSet& params);

  /// Fan-in scaled truncated-normal weights, zero biases, unit norm scales.
  void initialize(ParamSet& params, Rng& rng) const;

  /// Runs stages 1..last_stage and returns their maps in order. Throws
  /// InvalidInput when the image does not match the configured resolution.
  std::vector<FeatureMap> forward(const Image& img, const ParamSet& params, int last_stage = kNumStages,
                                  BackboneCache* cache = nullptr) const;
  std::vector<FeatureMap> forward(const Tensor& input, const ParamSet& params,
                                  int last_stage = kNumStages, BackboneCache* cache = nullptr) const;

  /// Backpropagates a gradient on the output of `stage`; accumulates parameter
  /// gradients and returns the gradient w.r.t. the input tensor. Throws
  /// InvalidState when the cache is missing that stage or predates the
  /// current parameter version.
  Tensor backward(const Tensor& grad_stage_out, int stage, const BackboneCache& cache,
                  const ParamSet& params, Gradients& grads) const;

  const BackboneConfig& config() const noexcept { return cfg_; }
  int stage_side(int stage) const { return cfg_.input_side / kStageStrides.at(stage - 1); }

  /// Image -> [H*W x C] tensor scaled to [0,1].
  static Tensor image_to_tensor(const Image& img);

 private:
  struct BlockParams {
    std::size_t dw_w, dw_b, ln_g, ln_b, pw1_w, pw1_b, pw2_w, pw2_b;
  };
  struct StageParams {
    std::size_t in_w, in_b;          // stem or downsample linear
    std::size_t norm_g, norm_b;      // stem LayerNorm (after) or downsample LayerNorm (before)
    std::vector<BlockParams> blocks;
  };

  Tensor block_forward(const Tensor& x, int side, const BlockParams& p, const ParamSet& params,
                       BlockCache* cache) const;
  Tensor block_backward(const Tensor& dy, int side, const BlockParams& p, const BlockCache& cache,
                        const ParamSet& params, Gradients& grads) const;

  BackboneConfig cfg_;
  std::array<StageParams, kNumStages> stages_;
};

/// Picks one stage (1-based) from a forward result. Throws InvalidInput when
/// the stage is outside 1..4 or was not computed.
const FeatureMap& select_stage(const std::vector<FeatureMap>& maps, int stage);

/// Fixed 2-D sinusoidal table [side*side x dim]: the first dim/2 columns
/// encode the row index, the rest the column index. dim must be divisible by 4.
Tensor sinusoidal_positions(int side, int dim);

struct TokenSet {
  Tensor tokens;     // [M x D], projection plus positions
  Tensor positions;  // [M x D]
  int stage_of_origin = 0;
  int side = 0;
};

/// Learned C -> D projection of a flattened feature map plus the sinusoidal
/// positional signal.
class Tokenizer {
 public:
  Tokenizer(int in_channels, int dim, ParamSet& params);
  void initialize(ParamSet& params, Rng& rng) const;

  TokenSet tokenize(const FeatureMap& map, const ParamSet& params) const;
  /// Returns the gradient w.r.t. the feature map values.
  Tensor backward(const Tensor& grad_tokens, const FeatureMap& map, const ParamSet& params,
                  Gradients& grads) const;

  int dim() const noexcept { return dim_; }
  int in_channels() const noexcept { return in_channels_; }

 private:
  int in_channels_;
  int dim_;
  std::size_t w_, b_;
};

/// Fills a parameter tensor with truncated-normal values.
void init_truncated_normal(Tensor& t, Rng& rng, double stddev);

/// Truncated normal with sigma = 1/sqrt(rows), rows being the fan-in of a
/// [in x out] weight (or of a depthwise [taps x channels] kernel).
void init_fan_in(Tensor& t, Rng& rng);

}  // namespace lqe
