#include "lqe/layers.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lqe/error.hpp"

namespace lqe {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_mat(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MutMap as_mat(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const char* what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  as_mat(out).noalias() = as_mat(a) * as_mat(b);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  Tensor out = Tensor::matrix(a.cols(), b.cols());
  as_mat(out).noalias() = as_mat(a).transpose() * as_mat(b);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  Tensor out = Tensor::matrix(a.rows(), b.rows());
  as_mat(out).noalias() = as_mat(a) * as_mat(b).transpose();
  return out;
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  require(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols(),
          "matmul_tn_acc: shape mismatch");
  as_mat(out).noalias() += as_mat(a).transpose() * as_mat(b);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* b) {
  Tensor y = matmul(x, w);
  if (b) {
    require(b->size() == w.cols(), "linear: bias size");
    const std::size_t n = y.rows(), m = y.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) y(i, j) += (*b)[j];
  }
  return y;
}

Tensor linear_backward(const Tensor& dy, const Tensor& x, const Tensor& w, Tensor& dw, Tensor* db) {
  matmul_tn_acc(x, dy, dw);
  if (db) {
    const std::size_t n = dy.rows(), m = dy.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) (*db)[j] += dy(i, j);
  }
  return matmul_nt(dy, w);
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, LayerNormCache* cache) {
  const std::size_t n = x.rows(), d = x.cols();
  require(gamma.size() == d && beta.size() == d, "layer_norm: affine size");
  Tensor y = Tensor::matrix(n, d);
  if (cache) {
    cache->xhat = Tensor::matrix(n, d);
    cache->inv_std.assign(n, 0.0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += row[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mean) * inv;
      y(i, j) = xh * gamma[j] + beta[j];
      if (cache) cache->xhat(i, j) = xh;
    }
    if (cache) cache->inv_std[i] = inv;
  }
  return y;
}

Tensor layer_norm_backward(const Tensor& dy, const LayerNormCache& cache, const Tensor& gamma,
                           Tensor& dgamma, Tensor& dbeta) {
  const std::size_t n = dy.rows(), d = dy.cols();
  Tensor dx = Tensor::matrix(n, d);
  std::vector<double> g(d);
  for (std::size_t i = 0; i < n; ++i) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = cache.xhat(i, j);
      dgamma[j] += dy(i, j) * xh;
      dbeta[j] += dy(i, j);
      g[j] = dy(i, j) * gamma[j];
      sum_g += g[j];
      sum_gx += g[j] * xh;
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) = cache.inv_std[i] * (g[j] - inv_d * sum_g - cache.xhat(i, j) * inv_d * sum_gx);
    }
  }
  return dx;
}

constexpr double kInvSqrt2 = 0.70710678118654752440;

Tensor gelu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  return y;
}

Tensor gelu_backward(const Tensor& dy, const Tensor& x) {
  Tensor dx = dy;
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
    dx[i] *= cdf + v * pdf;
  }
  return dx;
}

Tensor depthwise_conv(const Tensor& x, int side, const Tensor& w, const Tensor& b) {
  const std::size_t c = x.cols();
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(w.rows()))));
  require(k * k == static_cast<int>(w.rows()) && (k % 2) == 1, "depthwise_conv: odd square kernel");
  require(w.cols() == c && b.size() == c, "depthwise_conv: channel mismatch");
  require(x.rows() == static_cast<std::size_t>(side) * side, "depthwise_conv: spatial size");
  const int r = k / 2;
  Tensor y = Tensor::matrix(x.rows(), c);
  for (int yy = 0; yy < side; ++yy) {
    for (int xx = 0; xx < side; ++xx) {
      double* out = y.data() + (static_cast<std::size_t>(yy) * side + xx) * c;
      for (std::size_t ch = 0; ch < c; ++ch) out[ch] = b[ch];
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = yy + dy;
        if (sy < 0 || sy >= side) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = xx + dx;
          if (sx < 0 || sx >= side) continue;
          const double* in = x.data() + (static_cast<std::size_t>(sy) * side + sx) * c;
          const double* kw = w.data() + static_cast<std::size_t>((dy + r) * k + (dx + r)) * c;
          for (std::size_t ch = 0; ch < c; ++ch) out[ch] += kw[ch] * in[ch];
        }
      }
    }
  }
  return y;
}

Tensor depthwise_conv_backward(const Tensor& dy, const Tensor& x, int side, const Tensor& w,
                               Tensor& dw, Tensor& db) {
  const std::size_t c = x.cols();
  const int k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(w.rows()))));
  const int r = k / 2;
  Tensor dx = Tensor::matrix(x.rows(), c);
  for (int yy = 0; yy < side; ++yy) {
    for (int xx = 0; xx < side; ++xx) {
      const double* g = dy.data() + (static_cast<std::size_t>(yy) * side + xx) * c;
      for (std::size_t ch = 0; ch < c; ++ch) db[ch] += g[ch];
      for (int oy = -r; oy <= r; ++oy) {
        const int sy = yy + oy;
        if (sy < 0 || sy >= side) continue;
        for (int ox = -r; ox <= r; ++ox) {
          const int sx = xx + ox;
          if (sx < 0 || sx >= side) continue;
          const std::size_t src = (static_cast<std::size_t>(sy) * side + sx) * c;
          const std::size_t tap = static_cast<std::size_t>((oy + r) * k + (ox + r)) * c;
          const double* in = x.data() + src;
          const double* kw = w.data() + tap;
          double* gin = dx.data() + src;
          double* gw = dw.data() + tap;
          for (std::size_t ch = 0; ch < c; ++ch) {
            gw[ch] += g[ch] * in[ch];
            gin[ch] += g[ch] * kw[ch];
          }
        }
      }
    }
  }
  return dx;
}

Tensor patchify(const Tensor& x, int side, int patch) {
  require(patch > 0 && side % patch == 0, "patchify: side must be a multiple of the patch");
  require(x.rows() == static_cast<std::size_t>(side) * side, "patchify: spatial size");
  const std::size_t c = x.cols();
  const int out_side = side / patch;
  Tensor out = Tensor::matrix(static_cast<std::size_t>(out_side) * out_side,
                              static_cast<std::size_t>(patch) * patch * c);
  for (int py = 0; py < out_side; ++py)
    for (int px = 0; px < out_side; ++px) {
      double* dst = out.data() + (static_cast<std::size_t>(py) * out_side + px) * out.cols();
      for (int iy = 0; iy < patch; ++iy)
        for (int ix = 0; ix < patch; ++ix) {
          const double* src =
              x.data() + (static_cast<std::size_t>(py * patch + iy) * side + px * patch + ix) * c;
          std::copy(src, src + c, dst + static_cast<std::size_t>(iy * patch + ix) * c);
        }
    }
  return out;
}

Tensor unpatchify(const Tensor& patches, int side, int patch, int channels) {
  const int out_side = side / patch;
  const auto c = static_cast<std::size_t>(channels);
  Tensor x = Tensor::matrix(static_cast<std::size_t>(side) * side, c);
  for (int py = 0; py < out_side; ++py)
    for (int px = 0; px < out_side; ++px) {
      const double* src = patches.data() + (static_cast<std::size_t>(py) * out_side + px) * patches.cols();
      for (int iy = 0; iy < patch; ++iy)
        for (int ix = 0; ix < patch; ++ix) {
          double* dst = x.data() + (static_cast<std::size_t>(py * patch + iy) * side + px * patch + ix) * c;
          const double* s = src + static_cast<std::size_t>(iy * patch + ix) * c;
          std::copy(s, s + c, dst);
        }
    }
  return x;
}

Tensor softmax_rows(const Tensor& logits, double scale) {
  Tensor y = logits;
  const std::size_t n = y.rows(), m = y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = y.data() + i * m;
    double mx = -INFINITY;
    for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, scale * row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      row[j] = std::exp(scale * row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < m; ++j) row[j] /= sum;
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& dy, const Tensor& y, double scale) {
  Tensor dx = Tensor::matrix(y.rows(), y.cols());
  const std::size_t n = y.rows(), m = y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < m; ++j) dot += dy(i, j) * y(i, j);
    for (std::size_t j = 0; j < m; ++j) dx(i, j) = scale * y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

double softplus(double x) {
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace lqe
