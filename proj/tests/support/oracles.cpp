#include "oracles.hpp"

#include <cmath>
#include <random>

namespace lqe::testing {

double direct_brightness(const Image& img) {
  long double sum = 0.0L;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) sum += img.at(y, x, c);
  return static_cast<double>(sum / (static_cast<long double>(img.height) * img.width * img.channels));
}

double direct_laplacian_variance(const Image& img) {
  auto luma = [&img](int y, int x) {
    if (img.channels == 1) return img.at(y, x);
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
  };
  static constexpr int kKernel[3][3] = {{0, 1, 0}, {1, -4, 1}, {0, 1, 0}};
  std::vector<double> response;
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < img.width; ++x) {
      double r = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) r += kKernel[dy + 1][dx + 1] * luma(y + dy, x + dx);
      response.push_back(r);
    }
  }
  if (response.empty()) return 0.0;
  double mean = 0.0;
  for (double r : response) mean += r;
  mean /= static_cast<double>(response.size());
  double var = 0.0;
  for (double r : response) var += (r - mean) * (r - mean);
  return var / static_cast<double>(response.size());
}

std::array<double, 256> direct_equalization(const std::vector<int>& levels) {
  std::array<double, 256> count{};
  for (int v : levels) count[v] += 1.0;
  const double n = static_cast<double>(levels.size());
  double cdf_min = 0.0;
  for (double c : count) {
    if (c > 0.0) {
      cdf_min = c;
      break;
    }
  }
  std::array<double, 256> map{};
  double running = 0.0;
  for (int v = 0; v < 256; ++v) {
    running += count[v];
    map[v] = 255.0 * (running - cdf_min) / (n - cdf_min);
  }
  return map;
}

std::vector<double> brute_force_pav_nonincreasing(const std::vector<double>& values) {
  struct Block {
    double sum;
    int size;
    double mean() const { return sum / size; }
  };
  std::vector<Block> blocks;
  for (double v : values) blocks.push_back({v, 1});
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i + 1 < blocks.size(); ++i) {
      if (blocks[i].mean() < blocks[i + 1].mean()) {
        blocks[i].sum += blocks[i + 1].sum;
        blocks[i].size += blocks[i + 1].size;
        blocks.erase(blocks.begin() + static_cast<std::ptrdiff_t>(i) + 1);
        merged = true;
        break;
      }
    }
  }
  std::vector<double> out;
  for (const Block& b : blocks) out.insert(out.end(), static_cast<std::size_t>(b.size), b.mean());
  return out;
}

double brute_force_qwk(const std::vector<std::vector<std::int64_t>>& counts) {
  const std::size_t k = counts.size();
  double total = 0.0;
  std::vector<double> row(k, 0.0), col(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      total += static_cast<double>(counts[i][j]);
      row[i] += static_cast<double>(counts[i][j]);
      col[j] += static_cast<double>(counts[i][j]);
    }
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d;
      const double observed = static_cast<double>(counts[i][j]) / total;
      const double expected = (row[i] / total) * (col[j] / total);
      num += w * observed;
      den += w * expected;
    }
  }
  if (num == 0.0 && den == 0.0) return 1.0;
  return 1.0 - num / den;
}

MonteCarloEstimate monte_carlo_kl_to_uniform(double alpha0, double alpha1, std::size_t samples,
                                             std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::gamma_distribution<double> g0(alpha0, 1.0), g1(alpha1, 1.0);
  const double log_norm = std::lgamma(alpha0 + alpha1) - std::lgamma(alpha0) - std::lgamma(alpha1);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t used = 0;
  while (used < samples) {
    const double a = g0(gen), b = g1(gen);
    const double p = b / (a + b);
    if (!(p > 0.0 && p < 1.0)) continue;
    const double log_pdf = log_norm + (alpha1 - 1.0) * std::log(p) + (alpha0 - 1.0) * std::log1p(-p);
    sum += log_pdf;
    sum_sq += log_pdf * log_pdf;
    ++used;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

}  // namespace lqe::testing
