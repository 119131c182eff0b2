#pragma once

#include <vector>

#include "lqe/tensor.hpp"

// Differentiable building blocks shared by the backbone, the query decoder and
// the evidential head. Activations are row-major matrices; spatial maps use one
// row per cell in HWC order. Backward functions *accumulate* into parameter
// gradients and *return* the input gradient.

namespace lqe {

Tensor matmul(const Tensor& a, const Tensor& b);       // a * b
Tensor matmul_tn(const Tensor& a, const Tensor& b);    // a^T * b
Tensor matmul_nt(const Tensor& a, const Tensor& b);    // a * b^T
/// out += a^T * b
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

/// y = x * w (+ b). x: [n x in], w: [in x out], b: [out] or null.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b = nullptr);
Tensor linear_backward(const Tensor& dy, const Tensor& x, const Tensor& w, Tensor& dw,
                       Tensor* db = nullptr);

struct LayerNormCache {
  Tensor xhat;
  std::vector<double> inv_std;
};

inline constexpr double kLayerNormEps = 1e-6;

/// Per-row normalization over the last dimension with affine gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  LayerNormCache* cache = nullptr);
Tensor layer_norm_backward(const Tensor& dy, const LayerNormCache& cache, const Tensor& gamma,
                           Tensor& dgamma, Tensor& dbeta);

/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& dy, const Tensor& x);

/// Depthwise k x k convolution, stride 1, zero "same" padding.
/// x: [side*side x C], w: [k*k x C], b: [C].
Tensor depthwise_conv(const Tensor& x, int side, const Tensor& w, const Tensor& b);
Tensor depthwise_conv_backward(const Tensor& dy, const Tensor& x, int side, const Tensor& w,
                               Tensor& dw, Tensor& db);

/// Non-overlapping patch extraction: [side^2 x C] -> [(side/p)^2 x p*p*C].
/// Combined with `linear` this is a stride-p, kernel-p convolution.
Tensor patchify(const Tensor& x, int side, int patch);
Tensor unpatchify(const Tensor& patches, int side, int patch, int channels);

/// Row-wise softmax of (scale * logits).
Tensor softmax_rows(const Tensor& logits, double scale = 1.0);
/// Gradient w.r.t. the unscaled logits given y = softmax_rows(logits, scale).
Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y, double scale = 1.0);

double softplus(double x);
double sigmoid(double x);

}  // namespace lqe
