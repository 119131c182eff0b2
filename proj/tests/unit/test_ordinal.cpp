#include <numeric>

#include "doctest.h"
#include "lqe/error.hpp"
#include "lqe/ordinal.hpp"
#include "lqe/rng.hpp"
#include "oracles.hpp"

using namespace lqe;

namespace {

void check_vec(const std::vector<double>& got, const std::vector<double>& want, double tol = 1e-12) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
}

std::vector<double> one_hot(int y, int k) {
  std::vector<double> p(static_cast<std::size_t>(k), 0.0);
  p[static_cast<std::size_t>(y)] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("hard encoding") {
  check_vec(encode_hard(0, 5).t, {0, 0, 0, 0});
  check_vec(encode_hard(4, 5).t, {1, 1, 1, 1});
  check_vec(encode_hard(2, 5).t, {1, 1, 0, 0});
  CHECK(encode_hard(2, 5).hard_label == 2);
  CHECK_THROWS_AS(encode_hard(5, 5), InvalidInput);
  CHECK_THROWS_AS(encode_hard(-1, 5), InvalidInput);
}

TEST_CASE("soft encoding is a tail sum") {
  check_vec(encode_soft(one_hot(2, 5)).t, {1, 1, 0, 0});
  const std::vector<double> mixed{0.5, 0, 0, 0, 0.5};
  check_vec(encode_soft(mixed).t, {0.5, 0.5, 0.5, 0.5});
  const std::vector<double> uniform(5, 0.2);
  check_vec(encode_soft(uniform).t, {0.8, 0.6, 0.4, 0.2});
  for (int k : {3, 5, 8})
    for (int y = 0; y < k; ++y) check_vec(encode_soft(one_hot(y, k)).t, encode_hard(y, k).t);
}

TEST_CASE("soft encoding is linear in the class distribution") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(5), q(5);
    for (auto* v : {&p, &q}) {
      double s = 0;
      for (double& x : *v) s += (x = rng.uniform());
      for (double& x : *v) x /= s;
    }
    const double lam = rng.uniform();
    std::vector<double> mix(5);
    for (int i = 0; i < 5; ++i) mix[i] = lam * p[i] + (1 - lam) * q[i];
    const auto tp = encode_soft(p).t, tq = encode_soft(q).t, tm = encode_soft(mix).t;
    for (int i = 0; i < 4; ++i) CHECK(tm[i] == doctest::Approx(lam * tp[i] + (1 - lam) * tq[i]).epsilon(1e-12));
    for (int i = 0; i + 1 < 4; ++i) CHECK(tm[i] >= tm[i + 1] - 1e-15);
  }
}

TEST_CASE("decoding examples") {
  const std::vector<double> certain{1, 1, 1, 1};
  check_vec(decode(certain).p, {0, 0, 0, 0, 1});
  const std::vector<double> graded{0.9, 0.5, 0.2, 0.05};
  check_vec(decode(graded).p, {0.1, 0.4, 0.3, 0.15, 0.05});

  const std::vector<double> bent{0.4, 0.6, 0.1, 0.05};
  const auto repaired = lqe::testing::brute_force_pav_nonincreasing(bent);
  check_vec(repaired, {0.5, 0.5, 0.1, 0.05});
  check_vec(decode(bent).p, decode(repaired).p);

  const std::vector<double> outside{1.2, 0.5};
  CHECK_THROWS_AS(decode(outside), InvalidInput);
}

TEST_CASE("isotonic repair agrees with the brute-force oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(1, 9)));
    for (double& x : v) x = rng.uniform();
    const auto got = isotonic_nonincreasing(v);
    const auto want = lqe::testing::brute_force_pav_nonincreasing(v);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-9);
    for (std::size_t i = 0; i + 1 < got.size(); ++i) CHECK(got[i] >= got[i + 1]);
  }
}

TEST_CASE("decode round-trips hard encodings and always returns a distribution") {
  for (int k : {3, 5, 8}) {
    for (int y = 0; y < k; ++y) {
      const ClassDistribution d = decode(encode_hard(y, k).t);
      check_vec(d.p, one_hot(y, k));
      CHECK(predict_grade(d) == y);
    }
  }
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pi(static_cast<std::size_t>(rng.uniform_int(1, 7)));
    for (double& x : pi) x = rng.uniform();
    const ClassDistribution d = decode(pi);
    CHECK(d.p.size() == pi.size() + 1);
    CHECK(std::abs(std::accumulate(d.p.begin(), d.p.end(), 0.0) - 1.0) < 1e-9);
    for (double x : d.p) CHECK(x >= 0.0);
  }
}

TEST_CASE("grade readouts") {
  const std::vector<double> a{0.1, 0.4, 0.3, 0.15, 0.05};
  CHECK(predict_grade(a) == 1);
  const std::vector<double> tie{0.5, 0.5, 0, 0, 0};
  CHECK(predict_grade(tie) == 0);
  CHECK(predict_grade(one_hot(3, 5)) == 3);
  const std::vector<double> pi{0.9, 0.7, 0.5, 0.2};
  CHECK(threshold_count_grade(pi) == 2);
}
