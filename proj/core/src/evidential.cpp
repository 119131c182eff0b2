#include "lqe/evidential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lqe/backbone.hpp"
#include "lqe/error.hpp"
#include "lqe/layers.hpp"
#include "lqe/special_functions.hpp"

namespace lqe {

EvidentialOutput from_evidence(std::span<const std::array<double, 2>> evidence) {
  if (evidence.empty()) throw InvalidInput("evidence needs at least one threshold");
  EvidentialOutput out;
  out.evidence.assign(evidence.begin(), evidence.end());
  const std::size_t t = evidence.size();
  out.alpha.resize(t);
  out.pi_hat.resize(t);
  out.strength.resize(t);
  out.uncertainty.resize(t);
  double u_sum = 0.0;
  for (std::size_t k = 0; k < t; ++k) {
    for (int c = 0; c < 2; ++c) {
      const double e = evidence[k][c];
      if (!(e >= 0.0) || !std::isfinite(e)) throw InvalidInput("evidence must be finite and >= 0");
      out.alpha[k][c] = e + 1.0;
    }
    out.strength[k] = out.alpha[k][0] + out.alpha[k][1];
    out.pi_hat[k] = out.alpha[k][1] / out.strength[k];
    out.uncertainty[k] = 2.0 / out.strength[k];
    u_sum += out.uncertainty[k];
  }
  out.u_mean = u_sum / static_cast<double>(t);
  return out;
}

EvidenceHead::EvidenceHead(int in_dim, int num_classes, ParamSet& params)
    : in_dim_(in_dim), num_classes_(num_classes) {
  if (in_dim < 1 || num_classes < 2) throw InvalidInput("evidence head needs D >= 1 and K >= 2");
  const auto out = static_cast<std::size_t>(2 * (num_classes - 1));
  w_ = params.add("head.w", {static_cast<std::size_t>(in_dim), out});
  b_ = params.add("head.b", {out});
}

void EvidenceHead::initialize(ParamSet& params, Rng& rng) const {
  init_fan_in(params[w_], rng);
  params[b_].fill(0.0);
  params.bump_version();
}

EvidentialOutput EvidenceHead::forward(const Tensor& pooled, const ParamSet& params, Cache* cache) const {
  if (pooled.size() != static_cast<std::size_t>(in_dim_)) throw InvalidInput("evidence head input width");
  if (!pooled.all_finite()) throw InvalidInput("evidence head input is not finite");
  Tensor x({1, pooled.size()}, std::vector<double>(pooled.values().begin(), pooled.values().end()));
  const Tensor z = linear(x, params[w_], &params[b_]);
  const std::size_t t = static_cast<std::size_t>(num_classes_ - 1);
  std::vector<std::array<double, 2>> e(t);
  for (std::size_t k = 0; k < t; ++k)
    for (int c = 0; c < 2; ++c) e[k][c] = std::max(softplus(z[2 * k + c]), kEvidenceFloor);
  if (cache) {
    cache->param_version = params.version();
    cache->input = std::move(x);
    cache->logits.assign(z.values().begin(), z.values().end());
  }
  return from_evidence(e);
}

Tensor EvidenceHead::backward(std::span<const double> d_evidence, const Cache& cache,
                              const ParamSet& params, Gradients& grads) const {
  if (cache.param_version != params.version()) throw InvalidState("evidence head cache is stale");
  if (d_evidence.size() != cache.logits.size()) throw InvalidInput("d_evidence size mismatch");
  Tensor dz = Tensor::matrix(1, cache.logits.size());
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const double z = cache.logits[i];
    dz[i] = softplus(z) > kEvidenceFloor ? d_evidence[i] * sigmoid(z) : 0.0;
  }
  Tensor dx = linear_backward(dz, cache.input, params[w_], grads[w_], &grads[b_]);
  return Tensor({dx.size()}, std::vector<double>(dx.values().begin(), dx.values().end()));
}

double data_loss(double pi_hat, double target) {
  if (!(pi_hat > 0.0 && pi_hat < 1.0)) throw InvalidInput("pi_hat must lie in (0,1)");
  if (!(target >= 0.0 && target <= 1.0)) throw InvalidInput("target must lie in [0,1]");
  return -(target * std::log(pi_hat) + (1.0 - target) * std::log1p(-pi_hat));
}

double kl_to_uniform(double alpha0, double alpha1) {
  if (!(alpha0 >= 1.0) || !(alpha1 >= 1.0)) throw InvalidInput("Dirichlet concentrations must be >= 1");
  const double s = alpha0 + alpha1;
  const double psi_s = digamma(s);
  // ln Gamma(2) = 0.
  const double kl = log_gamma(s) - log_gamma(alpha0) - log_gamma(alpha1) +
                    (alpha0 - 1.0) * (digamma(alpha0) - psi_s) + (alpha1 - 1.0) * (digamma(alpha1) - psi_s);
  return std::max(0.0, kl);
}

std::array<double, 2> kl_to_uniform_grad(double alpha0, double alpha1) {
  if (!(alpha0 >= 1.0) || !(alpha1 >= 1.0)) throw InvalidInput("Dirichlet concentrations must be >= 1");
  const double s = alpha0 + alpha1;
  const double tri_s = trigamma(s);
  return {(alpha0 - 1.0) * trigamma(alpha0) - (s - 2.0) * tri_s,
          (alpha1 - 1.0) * trigamma(alpha1) - (s - 2.0) * tri_s};
}

double lambda_at(double t, const AnnealSchedule& sched) {
  if (!(t >= 0.0)) throw InvalidInput("annealing time must be >= 0");
  if (!(sched.t_anneal > 0.0) || !(sched.lambda_max >= 0.0)) throw InvalidInput("invalid anneal schedule");
  return sched.lambda_max * std::min(1.0, t / sched.t_anneal);
}

EdlTerms edl_loss(const EvidentialOutput& out, const OrdinalTargets& targets, double t_epoch,
                  const AnnealSchedule& sched, bool want_grad) {
  const std::size_t t = out.num_thresholds();
  if (targets.t.size() != t) throw InvalidInput("edl_loss: threshold count mismatch");
  EdlTerms terms;
  terms.lambda = lambda_at(t_epoch, sched);
  if (want_grad) terms.d_evidence.assign(2 * t, 0.0);
  for (std::size_t k = 0; k < t; ++k) {
    const double a0 = out.alpha[k][0];
    const double a1 = out.alpha[k][1];
    const double s = a0 + a1;
    const double pi = out.pi_hat[k];
    const double tk = targets.t[k];
    terms.data += data_loss(pi, tk);
    terms.kl += kl_to_uniform(a0, a1);
    if (want_grad) {
      const double dpi = -tk / pi + (1.0 - tk) / (1.0 - pi);
      const auto dkl = kl_to_uniform_grad(a0, a1);
      terms.d_evidence[2 * k] = dpi * (-a1 / (s * s)) + terms.lambda * dkl[0];
      terms.d_evidence[2 * k + 1] = dpi * (a0 / (s * s)) + terms.lambda * dkl[1];
    }
  }
  terms.total = terms.data + terms.lambda * terms.kl;
  return terms;
}

double uncertainty_summary(const EvidentialOutput& out) {
  if (out.strength.empty()) throw InvalidInput("empty evidential output");
  double sum = 0.0;
  for (double s : out.strength) sum += 2.0 / s;
  return sum / static_cast<double>(out.strength.size());
}

}  // namespace lqe
