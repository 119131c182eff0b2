#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lqe/image.hpp"
#include "lqe/imageqc.hpp"
#include "lqe/rng.hpp"

namespace lqe {

/// Training-time augmentation catalogue. Probabilities are per image; the
/// magnitude fields bound the random jitter drawn when an op fires.
struct AugmentConfig {
  double clahe_prob = 0.2;
  double flip_prob = 0.5;
  double brightness_contrast_prob = 0.3;
  double hue_sat_prob = 0.3;
  double noise_prob = 0.2;
  double blur_prob = 0.2;

  double clahe_clip_limit = 2.0;
  int clahe_tile_grid = 8;

  double mixup_alpha = 0.4;
  double cutmix_alpha = 1.0;
  double mix_prob = 0.3;

  std::uint64_t rng_seed = 0;

  double brightness_range = 0.2;
  double contrast_range = 0.2;
  double hue_degrees = 10.0;
  double saturation_range = 0.15;
  double noise_sigma_max = 10.0;
  double blur_sigma_max = 1.5;

  /// Throws InvalidInput when a probability leaves [0,1] or a magnitude is negative.
  void validate() const;

  /// Every stochastic op disabled.
  static AugmentConfig identity();
};

/// An image with a class-probability target (one-hot unless mixed).
struct MixedSample {
  Image image;
  std::vector<double> class_target;
  double mix_lambda = 1.0;
  std::optional<std::string> partner_id;
};

MixedSample make_sample(Image image, int label, int num_classes);

/// Contrast-limited adaptive histogram equalization on the luma channel.
///
/// Histograms use 256 integer bins. Each tile histogram is clipped at
/// clip_limit * tile_pixels / 256 with the excess spread evenly over all bins
/// (pass +infinity to disable clipping), mapped through
/// 255 * (cdf - cdf_min) / (n - cdf_min), and blended bilinearly between tile
/// centres. A tile holding a single intensity level maps to itself. When the
/// grid would make tiles thinner than two pixels the whole image is one tile.
Image apply_clahe(const Image& img, double clip_limit, int tile_grid);

/// Brightness/contrast, hue/saturation, Gaussian noise, Gaussian blur and
/// H/V flips, each with its configured probability; result clipped to [0,255].
Image apply_photometric(const Image& img, const AugmentConfig& cfg, Rng& rng);

/// Convex blend with lambda ~ Beta(alpha, alpha); alpha == 0 gives lambda = 1.
MixedSample mixup(const MixedSample& a, const MixedSample& b, double alpha, Rng& rng);
MixedSample mixup_with_lambda(const MixedSample& a, const MixedSample& b, double lambda);

/// Pastes a random rectangle of b into a. The rectangle side ratio is
/// sqrt(1 - lambda0) with lambda0 ~ Beta(alpha, alpha); the returned
/// mix_lambda is recomputed from the clipped rectangle area.
MixedSample cutmix(const MixedSample& a, const MixedSample& b, double alpha, Rng& rng);
MixedSample cutmix_with_box(const MixedSample& a, const MixedSample& b, const CropBox& box);

}  // namespace lqe
