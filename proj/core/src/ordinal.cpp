#include "lqe/ordinal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqe/error.hpp"

namespace lqe {

OrdinalTargets encode_hard(int label, int num_classes) {
  if (num_classes < 2) throw InvalidInput("need at least two classes");
  if (label < 0 || label >= num_classes) {
    throw InvalidInput("label " + std::to_string(label) + " outside [0," +
                       std::to_string(num_classes - 1) + "]");
  }
  OrdinalTargets out;
  out.num_classes = num_classes;
  out.hard_label = label;
  out.t.resize(num_classes - 1);
  for (int k = 0; k < num_classes - 1; ++k) out.t[k] = label > k ? 1.0 : 0.0;
  return out;
}

OrdinalTargets encode_soft(std::span<const double> class_probs) {
  const auto k = static_cast<int>(class_probs.size());
  if (k < 2) throw InvalidInput("need at least two classes");
  double sum = 0.0;
  for (double p : class_probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("class probabilities must be >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("class probabilities must sum to 1");
  OrdinalTargets out;
  out.num_classes = k;
  out.t.assign(k - 1, 0.0);
  double tail = 0.0;
  for (int c = k - 1; c >= 1; --c) {
    tail += class_probs[c];
    out.t[c - 1] = std::clamp(tail, 0.0, 1.0);
  }
  return out;
}

std::vector<double> isotonic_nonincreasing(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() < blocks.back().mean()) {
      Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

ClassDistribution decode(std::span<const double> exceedance) {
  if (exceedance.empty()) throw InvalidInput("decode needs at least one threshold");
  for (double v : exceedance) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidInput("exceedance probabilities must be in [0,1]");
  }
  const std::vector<double> pi = isotonic_nonincreasing(exceedance);
  const std::size_t t = pi.size();
  ClassDistribution d;
  d.p.resize(t + 1);
  d.p[0] = 1.0 - pi[0];
  for (std::size_t c = 1; c < t; ++c) d.p[c] = std::max(0.0, pi[c - 1] - pi[c]);
  d.p[t] = pi[t - 1];
  return d;
}

int predict_grade(std::span<const double> class_probs) {
  if (class_probs.empty()) throw InvalidInput("predict_grade on an empty distribution");
  return static_cast<int>(std::max_element(class_probs.begin(), class_probs.end()) - class_probs.begin());
}

int threshold_count_grade(std::span<const double> exceedance) {
  return static_cast<int>(std::count_if(exceedance.begin(), exceedance.end(), [](double v) { return v > 0.5; }));
}

}  // namespace lqe
