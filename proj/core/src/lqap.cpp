#include "lqe/lqap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqe/backbone.hpp"
#include "lqe/error.hpp"

namespace lqe {

void LqapConfig::validate() const {
  if (num_queries < 1) throw InvalidInput("num_queries must be >= 1");
  if (dim < 1) throw InvalidInput("query dim must be >= 1");
  if (depth < 1) throw InvalidInput("decoder depth must be >= 1");
  if (ffn_ratio < 1) throw InvalidInput("ffn_ratio must be >= 1");
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  if (!(query_dropout >= 0.0 && query_dropout < 1.0)) throw InvalidInput("query_dropout in [0,1)");
}

Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, double temperature,
                        AttentionCache* cache) {
  if (!(temperature > 0.0)) throw InvalidInput("attention temperature must be positive");
  if (q.cols() != k.cols() || k.rows() != v.rows()) throw InvalidInput("attention shape mismatch");
  const double scale = 1.0 / (std::sqrt(static_cast<double>(q.cols())) * temperature);
  Tensor weights = softmax_rows(matmul_nt(q, k), scale);
  Tensor out = matmul(weights, v);
  if (cache) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->weights = std::move(weights);
    cache->scale = scale;
  }
  return out;
}

AttentionGrads scaled_attention_backward(const Tensor& dout, const AttentionCache& cache,
                                         const Tensor* dweights) {
  AttentionGrads g;
  Tensor dw = matmul_nt(dout, cache.v);
  if (dweights) dw.add_scaled(*dweights);
  g.dv = matmul_tn(cache.weights, dout);
  Tensor dlogits = softmax_rows_backward(dw, cache.weights, cache.scale);
  g.dq = matmul(dlogits, cache.k);
  g.dk = matmul_tn(dlogits, cache.q);
  return g;
}

void Lqap::set_temperature(double temperature) {
  if (!(temperature > 0.0)) throw InvalidInput("temperature must be positive");
  cfg_.temperature = temperature;
}

Lqap::Lqap(const LqapConfig& cfg, ParamSet& params) : cfg_(cfg) {
  cfg_.validate();
  const auto n = static_cast<std::size_t>(cfg_.num_queries);
  const auto d = static_cast<std::size_t>(cfg_.dim);
  const std::size_t h = d * static_cast<std::size_t>(cfg_.ffn_ratio);
  queries_ = params.add("lqap.queries", {n, d});
  token_ln_g_ = params.add("lqap.token_ln.g", {d});
  token_ln_b_ = params.add("lqap.token_ln.b", {d});
  for (int l = 0; l < cfg_.depth; ++l) {
    const std::string p = "lqap.block" + std::to_string(l + 1) + ".";
    BlockParams b{};
    b.sa_ln_g = params.add(p + "sa_ln.g", {d});
    b.sa_ln_b = params.add(p + "sa_ln.b", {d});
    b.sa_wq = params.add(p + "sa.wq", {d, d});
    b.sa_wk = params.add(p + "sa.wk", {d, d});
    b.sa_wv = params.add(p + "sa.wv", {d, d});
    b.sa_wo = params.add(p + "sa.wo", {d, d});
    b.ca_ln_g = params.add(p + "ca_ln.g", {d});
    b.ca_ln_b = params.add(p + "ca_ln.b", {d});
    b.ca_wq = params.add(p + "ca.wq", {d, d});
    b.ca_wk = params.add(p + "ca.wk", {d, d});
    b.ca_wv = params.add(p + "ca.wv", {d, d});
    b.ca_wo = params.add(p + "ca.wo", {d, d});
    b.ffn_ln_g = params.add(p + "ffn_ln.g", {d});
    b.ffn_ln_b = params.add(p + "ffn_ln.b", {d});
    b.ffn_w1 = params.add(p + "ffn.w1", {d, h});
    b.ffn_b1 = params.add(p + "ffn.b1", {h});
    b.ffn_w2 = params.add(p + "ffn.w2", {h, d});
    b.ffn_b2 = params.add(p + "ffn.b2", {d});
    blocks_.push_back(b);
  }
  out_ln_g_ = params.add("lqap.out_ln.g", {d});
  out_ln_b_ = params.add("lqap.out_ln.b", {d});
  score_w_ = params.add("lqap.score.w", {d});
}

void Lqap::initialize(ParamSet& params, Rng& rng) const {
  // Queries start at unit scale so they are distinguishable after the
  // pre-norm LayerNorms from the first step.
  init_truncated_normal(params[queries_], rng, 1.0);
  params[token_ln_g_].fill(1.0);
  params[token_ln_b_].fill(0.0);
  for (const BlockParams& b : blocks_) {
    for (std::size_t g : {b.sa_ln_g, b.ca_ln_g, b.ffn_ln_g}) params[g].fill(1.0);
    for (std::size_t z : {b.sa_ln_b, b.ca_ln_b, b.ffn_ln_b, b.ffn_b1, b.ffn_b2}) params[z].fill(0.0);
    for (std::size_t w : {b.sa_wq, b.sa_wk, b.sa_wv, b.sa_wo, b.ca_wq, b.ca_wk, b.ca_wv, b.ca_wo,
                          b.ffn_w1, b.ffn_w2}) {
      init_fan_in(params[w], rng);
    }
  }
  params[out_ln_g_].fill(1.0);
  params[out_ln_b_].fill(0.0);
  init_fan_in(params[score_w_], rng);
  params.bump_version();
}

AttentionRecord Lqap::attend(const Tensor& tokens, const ParamSet& params, LqapCache* cache,
                             Rng* drop_rng) const {
  const auto n = static_cast<std::size_t>(cfg_.num_queries);
  const auto d = static_cast<std::size_t>(cfg_.dim);
  if (tokens.rank() != 2 || tokens.cols() != d || tokens.rows() == 0) {
    throw InvalidInput("lqap: tokens must be [M x " + std::to_string(d) + "]");
  }
  if (!tokens.all_finite()) throw InvalidInput("lqap: non-finite tokens");
  if (cache) {
    cache->param_version = params.version();
    cache->blocks.assign(blocks_.size(), {});
    cache->valid = true;
  }

  LayerNormCache tok_ln;
  Tensor mem = layer_norm(tokens, params[token_ln_g_], params[token_ln_b_], cache ? &tok_ln : nullptr);
  Tensor q = params[queries_];
  Tensor last_maps;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const BlockParams& b = blocks_[l];
    DecoderBlockCache* bc = cache ? &cache->blocks[l] : nullptr;

    // Query self-attention.
    LayerNormCache sa_ln;
    Tensor a = layer_norm(q, params[b.sa_ln_g], params[b.sa_ln_b], bc ? &sa_ln : nullptr);
    AttentionCache sa;
    Tensor heads = scaled_attention(matmul(a, params[b.sa_wq]), matmul(a, params[b.sa_wk]),
                                    matmul(a, params[b.sa_wv]), 1.0, bc ? &sa : nullptr);
    if (bc) bc->q_in_sa = q;
    q.add_scaled(matmul(heads, params[b.sa_wo]));
    if (bc) {
      bc->sa_ln = std::move(sa_ln);
      bc->sa_normed = std::move(a);
      bc->sa = std::move(sa);
      bc->sa_heads = std::move(heads);
    }

    // Temperature-scaled cross-attention over the tokens.
    LayerNormCache ca_ln;
    Tensor c = layer_norm(q, params[b.ca_ln_g], params[b.ca_ln_b], bc ? &ca_ln : nullptr);
    AttentionCache ca;
    Tensor ca_heads = scaled_attention(matmul(c, params[b.ca_wq]), matmul(mem, params[b.ca_wk]),
                                       matmul(mem, params[b.ca_wv]), cfg_.temperature, &ca);
    q.add_scaled(matmul(ca_heads, params[b.ca_wo]));
    if (l + 1 == blocks_.size()) last_maps = ca.weights;
    if (bc) {
      bc->ca_ln = std::move(ca_ln);
      bc->ca_normed = std::move(c);
      bc->ca = std::move(ca);
      bc->ca_heads = std::move(ca_heads);
    }

    // Feed-forward.
    LayerNormCache ffn_ln;
    Tensor f = layer_norm(q, params[b.ffn_ln_g], params[b.ffn_ln_b], bc ? &ffn_ln : nullptr);
    Tensor hidden = linear(f, params[b.ffn_w1], &params[b.ffn_b1]);
    Tensor act = gelu(hidden);
    q.add_scaled(linear(act, params[b.ffn_w2], &params[b.ffn_b2]));
    if (bc) {
      bc->ffn_ln = std::move(ffn_ln);
      bc->ffn_normed = std::move(f);
      bc->ffn_hidden = std::move(hidden);
      bc->ffn_act = std::move(act);
    }
  }

  LayerNormCache out_ln;
  AttentionRecord rec;
  rec.final_queries = layer_norm(q, params[out_ln_g_], params[out_ln_b_], cache ? &out_ln : nullptr);
  rec.maps = std::move(last_maps);

  Tensor scores = Tensor::matrix(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += rec.final_queries(i, j) * params[score_w_][j];
    scores[i] = s;
  }
  const Tensor w = softmax_rows(scores);
  rec.weights.assign(w.values().begin(), w.values().end());

  std::vector<double> keep(n, 1.0);
  if (drop_rng && cfg_.query_dropout > 0.0 && n > 1) {
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i) {
      keep[i] = drop_rng->bernoulli(cfg_.query_dropout) ? 0.0 : 1.0;
      kept += keep[i] > 0.0;
    }
    if (kept == 0) std::fill(keep.begin(), keep.end(), 1.0);
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += rec.weights[i] * keep[i];
  rec.pooled_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) rec.pooled_weights[i] = rec.weights[i] * keep[i] / mass;

  rec.pooled = Tensor::vector(d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) rec.pooled[j] += rec.pooled_weights[i] * rec.final_queries(i, j);

  if (cache) {
    cache->token_ln = std::move(tok_ln);
    cache->tokens_normed = std::move(mem);
    cache->out_ln = std::move(out_ln);
    cache->keep = std::move(keep);
    cache->keep_mass = mass;
  }
  return rec;
}

Tensor Lqap::backward(const LqapUpstream& up, const LqapCache& cache, const ParamSet& params,
                      Gradients& grads) const {
  if (!cache.valid) throw InvalidState("lqap backward without a forward cache");
  if (cache.param_version != params.version()) {
    throw InvalidState("lqap cache is stale: parameters changed since forward");
  }
  const auto n = static_cast<std::size_t>(cfg_.num_queries);
  const auto d = static_cast<std::size_t>(cfg_.dim);
  const Tensor& final_q = cache.out_ln.xhat;  // recomputed below with affine
  Tensor fq = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      fq(i, j) = final_q(i, j) * params[out_ln_g_][j] + params[out_ln_b_][j];

  // Softmax scores -> w (needed again for the backward pass).
  Tensor scores = Tensor::matrix(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += fq(i, j) * params[score_w_][j];
    scores[i] = s;
  }
  const Tensor w = softmax_rows(scores);
  std::vector<double> pw(n);
  for (std::size_t i = 0; i < n; ++i) pw[i] = w[i] * cache.keep[i] / cache.keep_mass;

  Tensor dfq = up.d_final_queries.empty() ? Tensor::matrix(n, d) : up.d_final_queries;
  std::vector<double> dpw(n, 0.0);
  if (!up.d_pooled.empty()) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        dfq(i, j) += pw[i] * up.d_pooled[j];
        dpw[i] += fq(i, j) * up.d_pooled[j];
      }
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += pw[i] * dpw[i];
  Tensor dw = Tensor::matrix(1, n);
  for (std::size_t i = 0; i < n; ++i) {
    dw[i] = cache.keep[i] / cache.keep_mass * (dpw[i] - dot);
    if (!up.d_weights.empty()) dw[i] += up.d_weights[i];
  }
  const Tensor dscores = softmax_rows_backward(dw, w);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      grads[score_w_][j] += dscores[i] * fq(i, j);
      dfq(i, j) += dscores[i] * params[score_w_][j];
    }

  Tensor dq = layer_norm_backward(dfq, cache.out_ln, params[out_ln_g_], grads[out_ln_g_], grads[out_ln_b_]);
  Tensor dmem = Tensor::matrix(cache.tokens_normed.rows(), d);

  for (std::size_t l = blocks_.size(); l-- > 0;) {
    const BlockParams& b = blocks_[l];
    const DecoderBlockCache& bc = cache.blocks[l];

    // FFN branch.
    Tensor dact = linear_backward(dq, bc.ffn_act, params[b.ffn_w2], grads[b.ffn_w2], &grads[b.ffn_b2]);
    Tensor dhidden = gelu_backward(dact, bc.ffn_hidden);
    Tensor df = linear_backward(dhidden, bc.ffn_normed, params[b.ffn_w1], grads[b.ffn_w1], &grads[b.ffn_b1]);
    dq.add_scaled(layer_norm_backward(df, bc.ffn_ln, params[b.ffn_ln_g], grads[b.ffn_ln_g], grads[b.ffn_ln_b]));

    // Cross-attention branch.
    Tensor dheads = linear_backward(dq, bc.ca_heads, params[b.ca_wo], grads[b.ca_wo]);
    const bool last = l + 1 == blocks_.size();
    AttentionGrads ag = scaled_attention_backward(
        dheads, bc.ca, (last && !up.d_maps.empty()) ? &up.d_maps : nullptr);
    Tensor dc = linear_backward(ag.dq, bc.ca_normed, params[b.ca_wq], grads[b.ca_wq]);
    dmem.add_scaled(linear_backward(ag.dk, cache.tokens_normed, params[b.ca_wk], grads[b.ca_wk]));
    dmem.add_scaled(linear_backward(ag.dv, cache.tokens_normed, params[b.ca_wv], grads[b.ca_wv]));
    dq.add_scaled(layer_norm_backward(dc, bc.ca_ln, params[b.ca_ln_g], grads[b.ca_ln_g], grads[b.ca_ln_b]));

    // Self-attention branch.
    Tensor dsheads = linear_backward(dq, bc.sa_heads, params[b.sa_wo], grads[b.sa_wo]);
    AttentionGrads sg = scaled_attention_backward(dsheads, bc.sa);
    Tensor da = linear_backward(sg.dq, bc.sa_normed, params[b.sa_wq], grads[b.sa_wq]);
    da.add_scaled(linear_backward(sg.dk, bc.sa_normed, params[b.sa_wk], grads[b.sa_wk]));
    da.add_scaled(linear_backward(sg.dv, bc.sa_normed, params[b.sa_wv], grads[b.sa_wv]));
    dq.add_scaled(layer_norm_backward(da, bc.sa_ln, params[b.sa_ln_g], grads[b.sa_ln_g], grads[b.sa_ln_b]));
  }
  grads[queries_].add_scaled(dq);
  return layer_norm_backward(dmem, cache.token_ln, params[token_ln_g_], grads[token_ln_g_], grads[token_ln_b_]);
}

double diversity_loss(const Tensor& queries, double margin, Tensor* grad, bool* zero_norm_flag) {
  const std::size_t n = queries.rows(), d = queries.cols();
  if (n < 2) throw InvalidInput("diversity_loss needs at least two queries");
  std::vector<double> norm(n);
  bool flagged = false;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += queries(i, j) * queries(i, j);
    norm[i] = std::sqrt(s);
    flagged |= norm[i] == 0.0;
  }
  if (zero_norm_flag) *zero_norm_flag = flagged;
  if (grad) *grad = Tensor::matrix(n, d);
  const double inv_pairs = 1.0 / static_cast<double>(n * (n - 1));
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      if (norm[i] == 0.0 || norm[k] == 0.0) {
        const double h = std::max(0.0, -margin);
        loss += 2.0 * h * h * inv_pairs;
        continue;
      }
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += queries(i, j) * queries(k, j);
      const double cos = dot / (norm[i] * norm[k]);
      const double h = std::max(0.0, cos - margin);
      // Both ordered pairs (i,k) and (k,i).
      loss += 2.0 * h * h * inv_pairs;
      if (grad && h > 0.0) {
        const double dcos = 4.0 * h * inv_pairs;
        for (std::size_t j = 0; j < d; ++j) {
          (*grad)(i, j) += dcos * (queries(k, j) / (norm[i] * norm[k]) - cos * queries(i, j) / (norm[i] * norm[i]));
          (*grad)(k, j) += dcos * (queries(i, j) / (norm[i] * norm[k]) - cos * queries(k, j) / (norm[k] * norm[k]));
        }
      }
    }
  }
  return loss;
}

double load_balance_loss(const Tensor& w_batch, Tensor* grad) {
  const std::size_t b = w_batch.rows(), n = w_batch.cols();
  if (b == 0 || n == 0) throw InvalidInput("load_balance_loss on an empty batch");
  std::vector<double> mean(n, 0.0);
  for (std::size_t r = 0; r < b; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += w_batch(r, i);
      mean[i] += w_batch(r, i);
    }
    if (std::abs(s - 1.0) > 1e-6) throw InvalidInput("pooling weights must sum to 1 per sample");
  }
  double loss = 0.0;
  const double target = 1.0 / static_cast<double>(n);
  for (double& m : mean) {
    m /= static_cast<double>(b);
    loss += (m - target) * (m - target);
  }
  if (grad) {
    *grad = Tensor::matrix(b, n);
    for (std::size_t r = 0; r < b; ++r)
      for (std::size_t i = 0; i < n; ++i) (*grad)(r, i) = 2.0 * (mean[i] - target) / static_cast<double>(b);
  }
  return loss;
}

double spatial_entropy_penalty(const Tensor& maps, std::span<const double> w, double h_min,
                               double h_max, Tensor* d_maps, std::vector<double>* d_w) {
  const std::size_t n = maps.rows(), m = maps.cols();
  if (w.size() != n) throw InvalidInput("spatial_entropy_penalty: one weight per map row");
  if (!(h_min >= 0.0 && h_min <= h_max)) throw InvalidInput("entropy band must satisfy 0 <= h_min <= h_max");
  if (d_maps) *d_maps = Tensor::matrix(n, m);
  if (d_w) d_w->assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = maps(i, j);
      if (a < 0.0 || !std::isfinite(a)) throw InvalidInput("attention maps must be non-negative");
      if (a > 0.0) h -= a * std::log(a);
    }
    const double lo = std::max(0.0, h_min - h);
    const double hi = std::max(0.0, h - h_max);
    const double penalty = lo * lo + hi * hi;
    total += w[i] * penalty;
    if (d_w) (*d_w)[i] = penalty;
    if (d_maps && penalty > 0.0) {
      const double dh = w[i] * (-2.0 * lo + 2.0 * hi);
      for (std::size_t j = 0; j < m; ++j) {
        const double a = maps(i, j);
        if (a > 0.0) (*d_maps)(i, j) = -dh * (std::log(a) + 1.0);
      }
    }
  }
  return total;
}

std::vector<Image> export_attention_heatmaps(const Tensor& maps, int stage_side, int output_side) {
  if (stage_side <= 0 || maps.cols() != static_cast<std::size_t>(stage_side) * stage_side) {
    throw InvalidInput("attention map width is not stage_side^2");
  }
  if (output_side < stage_side) throw InvalidInput("heatmap output_side smaller than stage_side");
  std::vector<Image> out;
  for (std::size_t i = 0; i < maps.rows(); ++i) {
    const auto row = maps.row(i);
    const auto [mn, mx] = std::minmax_element(row.begin(), row.end());
    const double range = *mx - *mn;
    Image img(output_side, output_side, 1, 0.0, "query_" + std::to_string(i));
    for (int y = 0; y < output_side; ++y) {
      const int sy = y * stage_side / output_side;
      for (int x = 0; x < output_side; ++x) {
        const int sx = x * stage_side / output_side;
        const double v = row[static_cast<std::size_t>(sy) * stage_side + sx];
        img.at(y, x) = range > 0.0 ? 255.0 * (v - *mn) / range : 0.0;
      }
    }
    quantize_u8(img);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace lqe
