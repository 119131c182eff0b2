#pragma once

#include <optional>
#include <span>
#include <vector>

namespace lqe {

/// Threshold exceedance targets t_k = P(y > k), k = 0..K-2.
struct OrdinalTargets {
  int num_classes = 5;
  std::vector<double> t;
  std::optional<int> hard_label;
};

struct ClassDistribution {
  std::vector<double> p;
};

OrdinalTargets encode_hard(int label, int num_classes);

/// Tail sums of a class distribution: t_k = sum_{c > k} p_c.
OrdinalTargets encode_soft(std::span<const double> class_probs);

/// Closest non-increasing sequence in least squares (pool adjacent violators).
std::vector<double> isotonic_nonincreasing(std::span<const double> values);

/// Cumulative-difference readout P(0) = 1 - pi_0, P(c) = pi_{c-1} - pi_c,
/// P(K-1) = pi_{K-2}, after projecting pi onto non-increasing sequences.
/// Throws InvalidInput for entries outside [0,1].
ClassDistribution decode(std::span<const double> exceedance);

/// Argmax with ties resolved toward the lower grade.
int predict_grade(std::span<const double> class_probs);
inline int predict_grade(const ClassDistribution& d) { return predict_grade(d.p); }

/// Alternative readout: number of thresholds with pi_k > 0.5.
int threshold_count_grade(std::span<const double> exceedance);

}  // namespace lqe
