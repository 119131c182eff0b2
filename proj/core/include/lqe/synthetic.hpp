#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lqe/dataset.hpp"
#include "lqe/image.hpp"
#include "lqe/rng.hpp"

namespace lqe {

/// Ordinal "lesion" surrogate: a grade-dependent number of bright
/// Gaussian blobs on a dark, gently textured background.
struct SyntheticSpec {
  int num_classes = 5;
  int images_per_grade = 200;
  int side = 128;
  std::vector<std::pair<int, int>> blob_counts{{0, 0}, {1, 3}, {4, 7}, {8, 12}, {13, 18}};
  double blob_radius_min = 3.5;
  double blob_radius_max = 4.5;
  double blob_intensity_min = 100.0;
  double blob_intensity_max = 140.0;
  double background_min = 24.0;
  double background_max = 40.0;
  double noise_sigma = 4.0;
  std::uint64_t seed = 0;

  /// Requires one range per grade with lo <= hi and both ends strictly increasing.
  void validate() const;
};

/// Grade 0 has no blobs; grade g spans the next g+2 counts ({1-3}, {4-7}, ... for K=5).
std::vector<std::pair<int, int>> default_blob_counts(int num_classes);

/// Renders one image with exactly `blobs` lesions.
Image render_synthetic(const SyntheticSpec& spec, int blobs, Rng& rng);

/// Generates images_per_grade images per grade and splits each grade
/// 70/15/15 into train/val/test after a seeded shuffle.
Dataset make_synthetic(const SyntheticSpec& spec);

}  // namespace lqe
