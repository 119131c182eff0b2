#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lqe/image.hpp"
#include "lqe/layers.hpp"
#include "lqe/rng.hpp"
#include "lqe/tensor.hpp"

namespace lqe {

struct LqapConfig {
  int num_queries = 8;
  int dim = 64;
  int depth = 2;
  int ffn_ratio = 2;
  double temperature = 0.5;
  double query_dropout = 0.1;

  void validate() const;
};

/// softmax(q k^T / (sqrt(d_k) * temperature)) v, single head.
struct AttentionCache {
  Tensor q, k, v;
  Tensor weights;  // [Nq x Nk]
  double scale = 1.0;
};

Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, double temperature,
                        AttentionCache* cache = nullptr);

struct AttentionGrads {
  Tensor dq, dk, dv;
};

/// `dweights`, when given, is an extra upstream gradient on the attention
/// weights themselves (used by regularizers on the attention maps).
AttentionGrads scaled_attention_backward(const Tensor& dout, const AttentionCache& cache,
                                         const Tensor* dweights = nullptr);

struct AttentionRecord {
  Tensor maps;                  // [N x M] cross-attention of the last decoder block
  std::vector<double> weights;  // pooling weights w, length N, sums to 1
  std::vector<double> pooled_weights;  // w after query dropout and renormalization
  Tensor pooled;                // [D]
  Tensor final_queries;         // [N x D]
};

struct DecoderBlockCache {
  Tensor q_in_sa;
  LayerNormCache sa_ln;
  Tensor sa_normed;
  AttentionCache sa;
  Tensor sa_heads;
  LayerNormCache ca_ln;
  Tensor ca_normed;
  AttentionCache ca;
  Tensor ca_heads;
  LayerNormCache ffn_ln;
  Tensor ffn_normed;
  Tensor ffn_hidden;
  Tensor ffn_act;
};

struct LqapCache {
  std::uint64_t param_version = 0;
  bool valid = false;
  LayerNormCache token_ln;
  Tensor tokens_normed;
  std::vector<DecoderBlockCache> blocks;
  LayerNormCache out_ln;
  std::vector<double> keep;  // 1 = query kept, 0 = dropped
  double keep_mass = 1.0;
};

/// Upstream gradients entering the decoder from the loss terms.
struct LqapUpstream {
  Tensor d_pooled;                // [D]
  Tensor d_final_queries;         // [N x D] or empty
  std::vector<double> d_weights;  // [N] on w (pre-dropout) or empty
  Tensor d_maps;                  // [N x M] or empty
};

/// Lesion-query attention pooling: learnable queries refined by a stack of
/// (self-attention, temperature-scaled cross-attention over tokens, FFN)
/// pre-norm residual blocks; pooled = sum_i w_i * final_query_i with w a
/// softmax of a learned per-query score.
class Lqap {
 public:
  Lqap(const LqapConfig& cfg, ParamSet& params);
  void initialize(ParamSet& params, Rng& rng) const;

  /// `drop_rng` enables query dropout (training); pass nullptr for evaluation.
  AttentionRecord attend(const Tensor& tokens, const ParamSet& params, LqapCache* cache = nullptr,
                         Rng* drop_rng = nullptr) const;

  /// Accumulates parameter gradients and returns the gradient w.r.t. tokens.
  Tensor backward(const LqapUpstream& upstream, const LqapCache& cache, const ParamSet& params,
                  Gradients& grads) const;

  const LqapConfig& config() const noexcept { return cfg_; }
  /// Changes the cross-attention temperature used by later calls.
  void set_temperature(double temperature);
  std::size_t queries_index() const noexcept { return queries_; }

 private:
  struct BlockParams {
    std::size_t sa_ln_g, sa_ln_b, sa_wq, sa_wk, sa_wv, sa_wo;
    std::size_t ca_ln_g, ca_ln_b, ca_wq, ca_wk, ca_wv, ca_wo;
    std::size_t ffn_ln_g, ffn_ln_b, ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  LqapConfig cfg_;
  std::size_t queries_;
  std::size_t token_ln_g_, token_ln_b_;
  std::vector<BlockParams> blocks_;
  std::size_t out_ln_g_, out_ln_b_;
  std::size_t score_w_;
};

/// (1/(N(N-1))) * sum_{i != j} max(0, cos(q_i, q_j) - margin)^2.
/// Rows with zero norm contribute cos = 0 and set *zero_norm_flag.
double diversity_loss(const Tensor& queries, double margin, Tensor* grad = nullptr,
                      bool* zero_norm_flag = nullptr);

/// || mean_b(w_b) - 1/N ||^2 over a [B x N] batch of pooling weights.
/// Throws InvalidInput when a row does not sum to 1 (tolerance 1e-6).
double load_balance_loss(const Tensor& w_batch, Tensor* grad = nullptr);

/// sum_i w_i * (max(0, h_min - H_i)^2 + max(0, H_i - h_max)^2) with H_i the
/// Shannon entropy (nats) of attention row i. Throws on negative entries.
double spatial_entropy_penalty(const Tensor& maps, std::span<const double> w, double h_min,
                               double h_max, Tensor* d_maps = nullptr,
                               std::vector<double>* d_w = nullptr);

/// Default entropy band [0.15 ln M, 0.85 ln M].
inline std::pair<double, double> default_entropy_band(std::size_t num_tokens) {
  const double h = std::log(static_cast<double>(num_tokens));
  return {0.15 * h, 0.85 * h};
}

/// One 8-bit grayscale heatmap per query: the attention row reshaped to
/// stage_side x stage_side, min-max scaled to [0,255] (constant rows render
/// as zeros) and nearest-neighbour upsampled to output_side.
std::vector<Image> export_attention_heatmaps(const Tensor& maps, int stage_side, int output_side);

}  // namespace lqe
