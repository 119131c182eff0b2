#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gradcheck.hpp"
#include "lqe/error.hpp"
#include "lqe/evidential.hpp"
#include "lqe/special_functions.hpp"
#include "oracles.hpp"

using namespace lqe;

namespace {

using Pairs = std::vector<std::array<double, 2>>;

}  // namespace

TEST_CASE("derived quantities from raw evidence") {
  const EvidentialOutput zero = from_evidence(Pairs{{0, 0}});
  CHECK(zero.alpha[0] == std::array<double, 2>{1, 1});
  CHECK(zero.pi_hat[0] == 0.5);
  CHECK(zero.strength[0] == 2.0);
  CHECK(zero.uncertainty[0] == 1.0);
  CHECK(zero.u_mean == 1.0);

  const EvidentialOutput up = from_evidence(Pairs{{0, 4}});
  CHECK(up.alpha[0] == std::array<double, 2>{1, 5});
  CHECK(up.pi_hat[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(up.strength[0] == 6.0);
  CHECK(up.uncertainty[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  const EvidentialOutput down = from_evidence(Pairs{{4, 0}});
  CHECK(down.pi_hat[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  CHECK_THROWS_AS(from_evidence(Pairs{{-1, 0}}), InvalidInput);
  CHECK_THROWS_AS(from_evidence(Pairs{{std::nan(""), 0}}), InvalidInput);
}

TEST_CASE("binary cross-entropy") {
  for (double t : {0.0, 0.3, 1.0}) CHECK(data_loss(0.5, t) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(data_loss(5.0 / 6.0, 1.0) == doctest::Approx(-std::log(5.0 / 6.0)).epsilon(1e-15));
  for (double t : {0.2, 0.5, 0.85}) {
    double best = 1e9, arg = -1;
    for (int i = 1; i < 1000; ++i) {
      const double p = i / 1000.0;
      if (data_loss(p, t) < best) {
        best = data_loss(p, t);
        arg = p;
      }
    }
    CHECK(arg == doctest::Approx(t).epsilon(1e-9));
  }
}

TEST_CASE("KL to the uniform Beta") {
  CHECK(std::abs(kl_to_uniform(1.0, 1.0)) < 1e-12);
  CHECK(kl_to_uniform(2.0, 1.0) == doctest::Approx(std::log(2.0) - 0.5).epsilon(1e-12));
  const auto mc = lqe::testing::monte_carlo_kl_to_uniform(2.0, 1.0, 1000000, 17);
  CHECK(std::abs(kl_to_uniform(2.0, 1.0) - mc.mean) < 3.0 * mc.standard_error);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const double a = rng.uniform(1.0, 8.0), b = rng.uniform(1.0, 8.0);
    CHECK(kl_to_uniform(a, b) == doctest::Approx(kl_to_uniform(b, a)).epsilon(1e-14));
    CHECK(kl_to_uniform(a, b) >= 0.0);
  }
  CHECK_THROWS_AS(kl_to_uniform(0.5, 1.0), InvalidInput);
}

TEST_CASE("special functions against the standard library and recurrences") {
  for (double x : {0.3, 1.0, 2.5, 7.0, 40.0}) {
    CHECK(log_gamma(x) == doctest::Approx(std::lgamma(x)).epsilon(1e-13));
    CHECK(digamma(x + 1.0) - digamma(x) == doctest::Approx(1.0 / x).epsilon(1e-12));
    CHECK(trigamma(x) - trigamma(x + 1.0) == doctest::Approx(1.0 / (x * x)).epsilon(1e-10));
  }
  CHECK(std::abs(digamma(1.0) + 0.5772156649015329) < 1e-13);
  CHECK(trigamma(1.0) == doctest::Approx(std::numbers::pi * std::numbers::pi / 6.0).epsilon(1e-12));
}

TEST_CASE("annealing coefficient") {
  const AnnealSchedule s{0.1, 10.0};
  CHECK(lambda_at(0.0, s) == 0.0);
  CHECK(lambda_at(5.0, s) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(lambda_at(10.0, s) == 0.1);
  CHECK(lambda_at(100.0, s) == 0.1);
  double prev = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double l = lambda_at(i * 0.05, s);
    CHECK(l >= prev);
    CHECK(l - prev <= 0.1 * 0.05 / 10.0 + 1e-15);
    CHECK(l <= s.lambda_max);
    prev = l;
  }
}

TEST_CASE("EDL loss composition") {
  const AnnealSchedule sched;
  const Pairs zero(4, {0.0, 0.0});
  for (int y = 0; y < 5; ++y) {
    const EdlTerms t = edl_loss(from_evidence(zero), encode_hard(y, 5), 0.0, sched);
    CHECK(t.total == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(t.lambda == 0.0);
  }

  const Pairs ev{{0.5, 3.0}, {1.0, 2.0}, {4.0, 0.2}, {2.0, 2.0}};
  const EvidentialOutput out = from_evidence(ev);
  const OrdinalTargets target = encode_hard(2, 5);
  double bce = 0.0;
  for (std::size_t k = 0; k < 4; ++k) bce += data_loss(out.pi_hat[k], target.t[k]);
  const EdlTerms at0 = edl_loss(out, target, 0.0, sched);
  CHECK(at0.total == doctest::Approx(bce).epsilon(1e-14));
  CHECK(at0.data == doctest::Approx(bce).epsilon(1e-14));

  const EdlTerms late = edl_loss(out, target, 50.0, sched);
  CHECK(late.lambda == sched.lambda_max);
  CHECK(late.total == doctest::Approx(late.data + sched.lambda_max * late.kl).epsilon(1e-14));
}

TEST_CASE("KL term grows as one alpha rises above one from the uniform prior") {
  const AnnealSchedule sched;
  const OrdinalTargets target = encode_hard(2, 5);
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t side = 0; side < 2; ++side) {
      double prev = edl_loss(from_evidence(Pairs(4, {0, 0})), target, 20.0, sched).kl;
      CHECK(prev == doctest::Approx(0.0).epsilon(1e-12));
      for (double e = 0.25; e <= 8.0; e += 0.25) {
        Pairs ev(4, {0, 0});
        ev[k][side] = e;
        const double kl = edl_loss(from_evidence(ev), target, 20.0, sched).kl;
        CHECK(kl > prev);
        prev = kl;
      }
    }
  }
}

TEST_CASE("KL term grows when the dominant alpha of a pair rises") {
  const AnnealSchedule sched;
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Pairs ev(4);
    for (auto& e : ev) e = {rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0)};
    const OrdinalTargets target = encode_hard(rng.uniform_int(0, 4), 5);
    const double base = edl_loss(from_evidence(ev), target, 20.0, sched).kl;
    Pairs more = ev;
    auto& pair = more[static_cast<std::size_t>(rng.uniform_int(0, 3))];
    pair[pair[0] >= pair[1] ? 0 : 1] += 0.5;
    CHECK(edl_loss(from_evidence(more), target, 20.0, sched).kl > base);
  }
}

TEST_CASE("raising the minority alpha can lower the KL term") {
  const AnnealSchedule sched;
  const OrdinalTargets target = encode_hard(0, 2);
  const double skewed = edl_loss(from_evidence(Pairs{{0, 4}}), target, 20.0, sched).kl;
  const double evened = edl_loss(from_evidence(Pairs{{1, 4}}), target, 20.0, sched).kl;
  CHECK(evened < skewed);
}

TEST_CASE("evidence on the correct side drives the data loss toward zero") {
  const AnnealSchedule sched;
  for (int y = 0; y < 5; ++y) {
    const OrdinalTargets target = encode_hard(y, 5);
    double prev = 1e9;
    for (double s = 0.0; s <= 200.0; s += 5.0) {
      Pairs ev(4);
      for (std::size_t k = 0; k < 4; ++k) ev[k] = target.t[k] > 0.5 ? std::array<double, 2>{0, s} : std::array<double, 2>{s, 0};
      const double loss = edl_loss(from_evidence(ev), target, 0.0, sched).total;
      CHECK(loss < prev);
      prev = loss;
    }
    CHECK(prev < 0.05);
  }
}

TEST_CASE("uncertainty summary") {
  CHECK(uncertainty_summary(from_evidence(Pairs(4, {0, 0}))) == 1.0);
  CHECK(uncertainty_summary(from_evidence(Pairs(4, {9, 9}))) == doctest::Approx(0.1).epsilon(1e-15));
  Rng rng(3);
  Pairs ev(4);
  for (auto& e : ev) e = {rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
  const double u = uncertainty_summary(from_evidence(ev));
  for (std::size_t k = 0; k < 4; ++k)
    for (int c = 0; c < 2; ++c) {
      Pairs more = ev;
      more[k][static_cast<std::size_t>(c)] += 0.1;
      CHECK(uncertainty_summary(from_evidence(more)) < u);
    }
}

TEST_CASE("evidence head output is strictly inside the unit interval") {
  ParamSet params;
  const EvidenceHead head(6, 5, params);
  Rng rng(4);
  head.initialize(params, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = lqe::testing::random_tensor({6}, rng, 30.0);
    const EvidentialOutput out = head.forward(x, params);
    REQUIRE(out.num_thresholds() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(out.pi_hat[k] > 0.0);
      CHECK(out.pi_hat[k] < 1.0);
      CHECK(out.evidence[k][0] >= kEvidenceFloor);
    }
  }
}

TEST_CASE("evidential gradients match central differences") {
  using namespace lqe::testing;
  for (const GradCheckResult& r : {gradcheck_evidence_head(1), gradcheck_edl_loss(2, false),
                                    gradcheck_edl_loss(3, true), gradcheck_kl_to_uniform(4)}) {
    INFO(r.name << " max rel error " << r.max_relative_error << " over " << r.coordinates);
    CHECK(r.coordinates >= 8);
    CHECK(r.passed(1e-4));
  }
}
