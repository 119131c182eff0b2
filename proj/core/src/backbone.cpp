#include "lqe/backbone.hpp"

#include <cmath>
#include <string>

#include "lqe/error.hpp"

namespace lqe {

void BackboneConfig::validate() const {
  if (in_channels < 1) throw InvalidInput("backbone in_channels must be >= 1");
  if (input_side <= 0 || input_side % kStageStrides.back() != 0) {
    throw InvalidInput("backbone input_side must be a positive multiple of 32");
  }
  for (int s = 0; s < kNumStages; ++s) {
    if (widths[s] < 1 || depths[s] < 0) throw InvalidInput("backbone widths/depths invalid");
  }
  if (kernel < 1 || kernel % 2 == 0) throw InvalidInput("backbone kernel must be odd");
  if (mlp_ratio < 1) throw InvalidInput("backbone mlp_ratio must be >= 1");
}

void init_truncated_normal(Tensor& t, Rng& rng, double stddev) {
  for (double& v : t.values()) v = rng.truncated_normal(stddev);
}

void init_fan_in(Tensor& t, Rng& rng) {
  if (t.rows() == 0) throw InvalidInput("init_fan_in on an empty tensor");
  init_truncated_normal(t, rng, 1.0 / std::sqrt(static_cast<double>(t.rows())));
}

Backbone::Backbone(const BackboneConfig& cfg, ParamSet& params) : cfg_(cfg) {
  cfg_.validate();
  const auto sz = [](int v) { return static_cast<std::size_t>(v); };
  for (int s = 0; s < kNumStages; ++s) {
    const std::string pre = "backbone.stage" + std::to_string(s + 1) + ".";
    const std::size_t c = sz(cfg_.widths[s]);
    StageParams& sp = stages_[s];
    if (s == 0) {
      sp.in_w = params.add(pre + "stem.w", {sz(16 * cfg_.in_channels), c});
      sp.in_b = params.add(pre + "stem.b", {c});
      sp.norm_g = params.add(pre + "stem_ln.g", {c});
      sp.norm_b = params.add(pre + "stem_ln.b", {c});
    } else {
      const std::size_t prev = sz(cfg_.widths[s - 1]);
      sp.norm_g = params.add(pre + "down_ln.g", {prev});
      sp.norm_b = params.add(pre + "down_ln.b", {prev});
      sp.in_w = params.add(pre + "down.w", {4 * prev, c});
      sp.in_b = params.add(pre + "down.b", {c});
    }
    for (int j = 0; j < cfg_.depths[s]; ++j) {
      const std::string bp = pre + "block" + std::to_string(j + 1) + ".";
      const std::size_t hidden = c * sz(cfg_.mlp_ratio);
      BlockParams b{};
      b.dw_w = params.add(bp + "dw.w", {sz(cfg_.kernel * cfg_.kernel), c});
      b.dw_b = params.add(bp + "dw.b", {c});
      b.ln_g = params.add(bp + "ln.g", {c});
      b.ln_b = params.add(bp + "ln.b", {c});
      b.pw1_w = params.add(bp + "pw1.w", {c, hidden});
      b.pw1_b = params.add(bp + "pw1.b", {hidden});
      b.pw2_w = params.add(bp + "pw2.w", {hidden, c});
      b.pw2_b = params.add(bp + "pw2.b", {c});
      sp.blocks.push_back(b);
    }
  }
}

void Backbone::initialize(ParamSet& params, Rng& rng) const {
  for (const StageParams& sp : stages_) {
    init_fan_in(params[sp.in_w], rng);
    params[sp.in_b].fill(0.0);
    params[sp.norm_g].fill(1.0);
    params[sp.norm_b].fill(0.0);
    for (const BlockParams& b : sp.blocks) {
      init_fan_in(params[b.dw_w], rng);
      params[b.dw_b].fill(0.0);
      params[b.ln_g].fill(1.0);
      params[b.ln_b].fill(0.0);
      init_fan_in(params[b.pw1_w], rng);
      params[b.pw1_b].fill(0.0);
      init_fan_in(params[b.pw2_w], rng);
      params[b.pw2_b].fill(0.0);
    }
  }
  params.bump_version();
}

Tensor Backbone::image_to_tensor(const Image& img) {
  Tensor t = Tensor::matrix(img.pixel_count(), static_cast<std::size_t>(img.channels));
  for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = img.pixels[i] / 255.0;
  return t;
}

Tensor Backbone::block_forward(const Tensor& x, int side, const BlockParams& p,
                               const ParamSet& params, BlockCache* cache) const {
  Tensor dw = depthwise_conv(x, side, params[p.dw_w], params[p.dw_b]);
  LayerNormCache ln;
  Tensor normed = layer_norm(dw, params[p.ln_g], params[p.ln_b], cache ? &ln : nullptr);
  Tensor h = linear(normed, params[p.pw1_w], &params[p.pw1_b]);
  Tensor a = gelu(h);
  Tensor y = linear(a, params[p.pw2_w], &params[p.pw2_b]);
  y.add_scaled(x);
  if (cache) {
    cache->input = x;
    cache->dw_out = std::move(dw);
    cache->ln = std::move(ln);
    cache->ln_out = std::move(normed);
    cache->pw1_out = std::move(h);
    cache->act = std::move(a);
  }
  return y;
}

Tensor Backbone::block_backward(const Tensor& dy, int side, const BlockParams& p,
                                const BlockCache& cache, const ParamSet& params,
                                Gradients& grads) const {
  Tensor da = linear_backward(dy, cache.act, params[p.pw2_w], grads[p.pw2_w], &grads[p.pw2_b]);
  Tensor dh = gelu_backward(da, cache.pw1_out);
  Tensor dn = linear_backward(dh, cache.ln_out, params[p.pw1_w], grads[p.pw1_w], &grads[p.pw1_b]);
  Tensor ddw = layer_norm_backward(dn, cache.ln, params[p.ln_g], grads[p.ln_g], grads[p.ln_b]);
  Tensor dx = depthwise_conv_backward(ddw, cache.input, side, params[p.dw_w], grads[p.dw_w],
                                      grads[p.dw_b]);
  dx.add_scaled(dy);
  return dx;
}

std::vector<FeatureMap> Backbone::forward(const Image& img, const ParamSet& params, int last_stage,
                                          BackboneCache* cache) const {
  check_image(img);
  if (img.height != cfg_.input_side || img.width != cfg_.input_side) {
    throw InvalidInput("backbone expects " + std::to_string(cfg_.input_side) + "x" +
                       std::to_string(cfg_.input_side) + " input, got " +
                       std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  if (img.channels != cfg_.in_channels) {
    throw InvalidInput("backbone expects " + std::to_string(cfg_.in_channels) + " channels");
  }
  return forward(image_to_tensor(img), params, last_stage, cache);
}

std::vector<FeatureMap> Backbone::forward(const Tensor& input, const ParamSet& params,
                                          int last_stage, BackboneCache* cache) const {
  if (last_stage < 1 || last_stage > kNumStages) throw InvalidInput("last_stage must be in 1..4");
  if (input.rows() != static_cast<std::size_t>(cfg_.input_side) * cfg_.input_side ||
      input.cols() != static_cast<std::size_t>(cfg_.in_channels)) {
    throw InvalidInput("backbone input tensor has the wrong shape");
  }
  if (cache) {
    cache->param_version = params.version();
    cache->last_stage = last_stage;
  }
  std::vector<FeatureMap> maps;
  Tensor x;
  int side = cfg_.input_side;
  for (int s = 0; s < last_stage; ++s) {
    const StageParams& sp = stages_[s];
    StageCache* sc = cache ? &cache->stages[s] : nullptr;
    if (s == 0) {
      Tensor patches = patchify(input, side, 4);
      side /= 4;
      Tensor pre = linear(patches, params[sp.in_w], &params[sp.in_b]);
      LayerNormCache ln;
      x = layer_norm(pre, params[sp.norm_g], params[sp.norm_b], sc ? &ln : nullptr);
      if (sc) {
        sc->patches = std::move(patches);
        sc->pre_norm = std::move(pre);
        sc->ln = std::move(ln);
      }
    } else {
      LayerNormCache ln;
      Tensor normed = layer_norm(x, params[sp.norm_g], params[sp.norm_b], sc ? &ln : nullptr);
      Tensor patches = patchify(normed, side, 2);
      side /= 2;
      x = linear(patches, params[sp.in_w], &params[sp.in_b]);
      if (sc) {
        sc->patches = std::move(patches);
        sc->ln = std::move(ln);
      }
    }
    if (sc) sc->blocks.resize(sp.blocks.size());
    for (std::size_t j = 0; j < sp.blocks.size(); ++j) {
      x = block_forward(x, side, sp.blocks[j], params, sc ? &sc->blocks[j] : nullptr);
    }
    FeatureMap fm;
    fm.values = x;
    fm.side = side;
    fm.channels = cfg_.widths[s];
    fm.stage = s + 1;
    fm.stride = kStageStrides[s];
    maps.push_back(std::move(fm));
  }
  return maps;
}

Tensor Backbone::backward(const Tensor& grad_stage_out, int stage, const BackboneCache& cache,
                          const ParamSet& params, Gradients& grads) const {
  if (stage < 1 || stage > cache.last_stage) {
    throw InvalidState("backbone cache does not cover stage " + std::to_string(stage));
  }
  if (cache.param_version != params.version()) {
    throw InvalidState("backbone cache is stale: parameters changed since forward");
  }
  if (grads.size() != params.count()) throw InvalidInput("gradient buffer does not match params");
  Tensor g = grad_stage_out;
  for (int s = stage - 1; s >= 0; --s) {
    const StageParams& sp = stages_[s];
    const StageCache& sc = cache.stages[s];
    const int side = stage_side(s + 1);
    for (std::size_t j = sp.blocks.size(); j-- > 0;) {
      g = block_backward(g, side, sp.blocks[j], sc.blocks[j], params, grads);
    }
    if (s == 0) {
      Tensor dpre = layer_norm_backward(g, sc.ln, params[sp.norm_g], grads[sp.norm_g], grads[sp.norm_b]);
      Tensor dpatches = linear_backward(dpre, sc.patches, params[sp.in_w], grads[sp.in_w], &grads[sp.in_b]);
      g = unpatchify(dpatches, cfg_.input_side, 4, cfg_.in_channels);
    } else {
      Tensor dpatches = linear_backward(g, sc.patches, params[sp.in_w], grads[sp.in_w], &grads[sp.in_b]);
      const int prev_side = side * 2;
      Tensor dnormed = unpatchify(dpatches, prev_side, 2, cfg_.widths[s - 1]);
      g = layer_norm_backward(dnormed, sc.ln, params[sp.norm_g], grads[sp.norm_g], grads[sp.norm_b]);
    }
  }
  return g;
}

const FeatureMap& select_stage(const std::vector<FeatureMap>& maps, int stage) {
  if (stage < 1 || stage > kNumStages) {
    throw InvalidInput("stage must be in 1..4, got " + std::to_string(stage));
  }
  for (const FeatureMap& m : maps) {
    if (m.stage == stage) return m;
  }
  throw InvalidInput("stage " + std::to_string(stage) + " was not computed");
}

Tensor sinusoidal_positions(int side, int dim) {
  if (dim % 4 != 0) throw InvalidInput("positional dim must be divisible by 4");
  const int half = dim / 2;
  Tensor pe = Tensor::matrix(static_cast<std::size_t>(side) * side, static_cast<std::size_t>(dim));
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const std::size_t row = static_cast<std::size_t>(y) * side + x;
      for (int i = 0; i < half / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / half);
        pe(row, 2 * i) = std::sin(y * freq);
        pe(row, 2 * i + 1) = std::cos(y * freq);
        pe(row, half + 2 * i) = std::sin(x * freq);
        pe(row, half + 2 * i + 1) = std::cos(x * freq);
      }
    }
  }
  return pe;
}

Tokenizer::Tokenizer(int in_channels, int dim, ParamSet& params)
    : in_channels_(in_channels), dim_(dim) {
  if (in_channels < 1 || dim < 4 || dim % 4 != 0) {
    throw InvalidInput("tokenizer needs in_channels >= 1 and dim divisible by 4");
  }
  w_ = params.add("tokens.proj.w", {static_cast<std::size_t>(in_channels), static_cast<std::size_t>(dim)});
  b_ = params.add("tokens.proj.b", {static_cast<std::size_t>(dim)});
}

void Tokenizer::initialize(ParamSet& params, Rng& rng) const {
  init_fan_in(params[w_], rng);
  params[b_].fill(0.0);
  params.bump_version();
}

TokenSet Tokenizer::tokenize(const FeatureMap& map, const ParamSet& params) const {
  if (map.channels != in_channels_ || map.values.cols() != static_cast<std::size_t>(in_channels_)) {
    throw InvalidInput("tokenizer channel mismatch");
  }
  if (!map.values.all_finite()) throw InvalidInput("feature map contains non-finite values");
  TokenSet ts;
  ts.positions = sinusoidal_positions(map.side, dim_);
  ts.tokens = linear(map.values, params[w_], &params[b_]);
  ts.tokens.add_scaled(ts.positions);
  ts.stage_of_origin = map.stage;
  ts.side = map.side;
  return ts;
}

Tensor Tokenizer::backward(const Tensor& grad_tokens, const FeatureMap& map, const ParamSet& params,
                           Gradients& grads) const {
  return linear_backward(grad_tokens, map.values, params[w_], grads[w_], &grads[b_]);
}

}  // namespace lqe
