#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lqe/ordinal.hpp"
#include "lqe/rng.hpp"
#include "lqe/tensor.hpp"

namespace lqe {

/// Per-threshold Beta (2-component Dirichlet) beliefs.
/// Index 0 of each pair is "y <= k", index 1 is "y > k".
struct EvidentialOutput {
  std::vector<std::array<double, 2>> evidence;
  std::vector<std::array<double, 2>> alpha;  // evidence + 1
  std::vector<double> pi_hat;                // alpha_1 / S
  std::vector<double> strength;              // S = alpha_0 + alpha_1
  std::vector<double> uncertainty;           // 2 / S
  double u_mean = 1.0;

  std::size_t num_thresholds() const noexcept { return pi_hat.size(); }
};

/// Fills every derived field from raw evidence. Throws on negative or
/// non-finite evidence.
EvidentialOutput from_evidence(std::span<const std::array<double, 2>> evidence);

struct AnnealSchedule {
  double lambda_max = 0.1;
  double t_anneal = 10.0;  // epochs
};

/// Lower bound applied to softplus evidence.
inline constexpr double kEvidenceFloor = 1e-8;

/// Linear map D -> 2(K-1) followed by softplus (floored at kEvidenceFloor).
class EvidenceHead {
 public:
  EvidenceHead(int in_dim, int num_classes, ParamSet& params);
  void initialize(ParamSet& params, Rng& rng) const;

  struct Cache {
    std::uint64_t param_version = 0;
    Tensor input;                // [1 x D]
    std::vector<double> logits;  // 2(K-1)
  };

  EvidentialOutput forward(const Tensor& pooled, const ParamSet& params, Cache* cache = nullptr) const;
  /// d_evidence is laid out as [e_{0,0}, e_{0,1}, e_{1,0}, ...]; returns d pooled.
  Tensor backward(std::span<const double> d_evidence, const Cache& cache, const ParamSet& params,
                  Gradients& grads) const;

  int num_classes() const noexcept { return num_classes_; }

 private:
  int in_dim_;
  int num_classes_;
  std::size_t w_, b_;
};

/// Binary cross-entropy -[t ln(pi) + (1-t) ln(1-pi)].
double data_loss(double pi_hat, double target);

/// KL(Dir(alpha) || Dir(1, 1)) in closed form. Throws for alpha_c < 1.
double kl_to_uniform(double alpha0, double alpha1);
/// Partial derivatives of kl_to_uniform w.r.t. (alpha0, alpha1).
std::array<double, 2> kl_to_uniform_grad(double alpha0, double alpha1);

/// lambda_max * min(1, t / t_anneal).
double lambda_at(double t, const AnnealSchedule& sched);

struct EdlTerms {
  double data = 0.0;     // sum_k BCE
  double kl = 0.0;       // sum_k KL (unweighted)
  double lambda = 0.0;
  double total = 0.0;    // data + lambda * kl
  std::vector<double> d_evidence;  // filled when requested
};

EdlTerms edl_loss(const EvidentialOutput& out, const OrdinalTargets& targets, double t_epoch,
                  const AnnealSchedule& sched, bool want_grad = false);

/// Mean over thresholds of 2 / S_k.
double uncertainty_summary(const EvidentialOutput& out);

}  // namespace lqe
