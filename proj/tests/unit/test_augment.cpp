#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "lqe/augment.hpp"
#include "lqe/error.hpp"
#include "oracles.hpp"

using namespace lqe;
using lqe::testing::random_image;

namespace {

double target_sum(const MixedSample& s) { return std::accumulate(s.class_target.begin(), s.class_target.end(), 0.0); }

bool in_range(const Image& img) {
  for (double v : img.pixels)
    if (!(v >= 0.0 && v <= 255.0)) return false;
  return true;
}

}  // namespace

TEST_CASE("CLAHE leaves a constant image alone") {
  const Image flat(40, 40, 3, 87.0);
  CHECK(apply_clahe(flat, 2.0, 8) == flat);
  CHECK(apply_clahe(flat, std::numeric_limits<double>::infinity(), 1) == flat);
}

TEST_CASE("CLAHE on a two-level image equals direct histogram equalization") {
  Image img(16, 16, 1);
  std::vector<int> levels;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const int v = (y < 5) ? 50 : 200;
      img.at(y, x) = v;
      levels.push_back(v);
    }
  const auto map = lqe::testing::direct_equalization(levels);
  const Image out = apply_clahe(img, std::numeric_limits<double>::infinity(), 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(out.at(y, x) == doctest::Approx(map[(y < 5) ? 50 : 200]).epsilon(1e-12));
  CHECK(out.at(0, 0) == 0.0);
  CHECK(out.at(15, 15) == 255.0);
}

TEST_CASE("CLAHE output stays in range and keeps the shape") {
  Rng rng(2);
  for (int trial = 0; trial < 6; ++trial) {
    const Image img = random_image(33, 47, trial % 2 ? 3 : 1, rng);
    const Image out = apply_clahe(img, rng.uniform(0.5, 4.0), 1 + trial);
    CHECK(out.height == img.height);
    CHECK(out.width == img.width);
    CHECK(out.channels == img.channels);
    CHECK(in_range(out));
  }
  CHECK_THROWS_AS(apply_clahe(Image(16, 16, 1), 2.0, 0), InvalidInput);
}

TEST_CASE("photometric pipeline with every probability at zero is the identity") {
  Rng data(4);
  const Image img = random_image(24, 24, 3, data);
  Rng rng(9);
  CHECK(apply_photometric(img, AugmentConfig::identity(), rng) == img);
}

TEST_CASE("forced flips undo themselves when applied twice") {
  AugmentConfig cfg = AugmentConfig::identity();
  cfg.flip_prob = 1.0;
  Rng data(4);
  const Image img = random_image(20, 28, 3, data);
  Rng r1(13), r2(13);
  const Image once = apply_photometric(img, cfg, r1);
  CHECK(once != img);
  CHECK(once == flip_vertical(flip_horizontal(img)));
  CHECK(apply_photometric(once, cfg, r2) == img);
}

TEST_CASE("photometric pipeline is seeded and range preserving") {
  AugmentConfig cfg;
  cfg.clahe_prob = cfg.brightness_contrast_prob = cfg.hue_sat_prob = 1.0;
  cfg.noise_prob = cfg.blur_prob = cfg.flip_prob = 1.0;
  Rng data(8);
  const Image img = random_image(32, 32, 3, data);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng a(seed), b(seed);
    const Image x = apply_photometric(img, cfg, a);
    const Image y = apply_photometric(img, cfg, b);
    CHECK(x.pixels == y.pixels);
    CHECK(x.height == img.height);
    CHECK(in_range(x));
  }
  AugmentConfig bad;
  bad.flip_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("mixup endpoints and convexity") {
  Rng data(1);
  const MixedSample a = make_sample(random_image(16, 16, 3, data), 0, 5);
  const MixedSample b = make_sample(random_image(16, 16, 3, data), 4, 5);

  const MixedSample keep = mixup_with_lambda(a, b, 1.0);
  CHECK(keep.image == a.image);
  CHECK(keep.class_target == a.class_target);
  CHECK(keep.mix_lambda == 1.0);

  const MixedSample half = mixup_with_lambda(a, b, 0.5);
  const std::vector<double> expect{0.5, 0, 0, 0, 0.5};
  for (int k = 0; k < 5; ++k) CHECK(half.class_target[k] == doctest::Approx(expect[k]).epsilon(1e-15));
  CHECK(half.image.pixels[7] == doctest::Approx(0.5 * (a.image.pixels[7] + b.image.pixels[7])));

  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const MixedSample m = mixup(a, b, 0.4, rng);
    CHECK(std::abs(target_sum(m) - 1.0) < 1e-9);
    for (double t : m.class_target) CHECK(t >= 0.0);
    CHECK(in_range(m.image));
  }
}

TEST_CASE("cutmix box geometry defines lambda") {
  Rng data(1);
  const MixedSample a = make_sample(random_image(16, 16, 3, data), 1, 5);
  const MixedSample b = make_sample(random_image(16, 16, 3, data), 3, 5);

  const MixedSample none = cutmix_with_box(a, b, {3, 3, 0, 5});
  CHECK(none.image == a.image);
  CHECK(none.mix_lambda == 1.0);

  const MixedSample full = cutmix_with_box(a, b, {0, 0, 16, 16});
  CHECK(full.image.pixels == b.image.pixels);
  CHECK(full.mix_lambda == 0.0);

  const MixedSample quarter = cutmix_with_box(a, b, {4, 4, 8, 8});
  CHECK(quarter.mix_lambda == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(quarter.class_target[1] == doctest::Approx(0.75));
  CHECK(quarter.class_target[3] == doctest::Approx(0.25));
  CHECK(quarter.image.at(5, 5, 0) == b.image.at(5, 5, 0));
  CHECK(quarter.image.at(0, 0, 0) == a.image.at(0, 0, 0));

  CHECK_THROWS_AS(cutmix_with_box(a, b, {10, 10, 8, 8}), InvalidInput);

  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const MixedSample m = cutmix(a, b, 1.0, rng);
    CHECK(std::abs(target_sum(m) - 1.0) < 1e-9);
    CHECK(m.mix_lambda >= 0.0);
    CHECK(m.mix_lambda <= 1.0);
  }
}

TEST_CASE("mix partners must agree in shape") {
  Rng data(1);
  const MixedSample a = make_sample(random_image(16, 16, 3, data), 1, 5);
  const MixedSample b = make_sample(random_image(16, 20, 3, data), 1, 5);
  CHECK_THROWS_AS(mixup_with_lambda(a, b, 0.5), InvalidInput);
  CHECK_THROWS_AS(make_sample(Image(16, 16, 3), 5, 5), InvalidInput);
}
