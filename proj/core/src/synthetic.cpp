#include "lqe/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lqe/error.hpp"

namespace lqe {

void SyntheticSpec::validate() const {
  if (num_classes < 2) throw InvalidInput("synthetic spec needs at least two grades");
  if (images_per_grade < 1) throw InvalidInput("images_per_grade must be positive");
  if (side < kMinImageSide) throw InvalidInput("synthetic side below the ingestion minimum");
  if (static_cast<int>(blob_counts.size()) != num_classes) {
    throw InvalidInput("blob_counts needs one range per grade");
  }
  for (std::size_t g = 0; g < blob_counts.size(); ++g) {
    const auto [lo, hi] = blob_counts[g];
    if (lo < 0 || lo > hi) throw InvalidInput("invalid blob count range for grade " + std::to_string(g));
    if (g > 0 && (lo <= blob_counts[g - 1].first || hi <= blob_counts[g - 1].second)) {
      throw InvalidInput("blob count ranges must increase strictly with grade");
    }
  }
  if (!(blob_radius_min > 0.0) || blob_radius_max < blob_radius_min) {
    throw InvalidInput("invalid blob radius range");
  }
  if (blob_intensity_min < 0.0 || blob_intensity_max < blob_intensity_min) {
    throw InvalidInput("invalid blob intensity range");
  }
  if (background_min < 0.0 || background_max < background_min) {
    throw InvalidInput("invalid background range");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidInput("noise_sigma must be non-negative");
}

std::vector<std::pair<int, int>> default_blob_counts(int num_classes) {
  if (num_classes < 2) throw InvalidInput("default_blob_counts needs at least two grades");
  std::vector<std::pair<int, int>> out{{0, 0}};
  for (int g = 1; g < num_classes; ++g) {
    const int lo = out.back().second + 1;
    out.emplace_back(lo, lo + g + 1);
  }
  return out;
}

Image render_synthetic(const SyntheticSpec& spec, int blobs, Rng& rng) {
  const int n = spec.side;
  Image img(n, n, 3);

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves(3);
  for (Wave& w : waves) {
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double freq = rng.uniform(1.0, 3.0) * 2.0 * std::numbers::pi / n;
    w = {freq * std::cos(angle), freq * std::sin(angle), rng.uniform(0.0, 2.0 * std::numbers::pi),
         rng.uniform(2.0, 5.0)};
  }
  const double base = rng.uniform(spec.background_min, spec.background_max);
  constexpr double kTint[3] = {1.25, 0.85, 0.6};
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      double tex = 0.0;
      for (const Wave& w : waves) tex += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = kTint[ch] * (base + tex);
    }
  }

  constexpr double kBlobColor[3] = {1.0, 0.9, 0.45};
  for (int k = 0; k < blobs; ++k) {
    const double sigma = rng.uniform(spec.blob_radius_min, spec.blob_radius_max);
    const double amp = rng.uniform(spec.blob_intensity_min, spec.blob_intensity_max);
    const double margin = std::min(2.0 * sigma, 0.25 * n);
    const double by = rng.uniform(margin, n - 1 - margin);
    const double bx = rng.uniform(margin, n - 1 - margin);
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    const int y0 = std::max(0, static_cast<int>(by) - reach), y1 = std::min(n - 1, static_cast<int>(by) + reach + 1);
    const int x0 = std::max(0, static_cast<int>(bx) - reach), x1 = std::min(n - 1, static_cast<int>(bx) + reach + 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double d2 = (y - by) * (y - by) + (x - bx) * (x - bx);
        const double g = amp * std::exp(-d2 / (2.0 * sigma * sigma));
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) += g * kBlobColor[ch];
      }
    }
  }

  if (spec.noise_sigma > 0.0) {
    for (double& v : img.pixels) v += rng.normal(0.0, spec.noise_sigma);
  }
  quantize_u8(img);
  return img;
}

Dataset make_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Rng root(spec.seed);
  Dataset ds;
  ds.num_classes = spec.num_classes;
  const int per = spec.images_per_grade;
  const int n_train = static_cast<int>(std::lround(0.70 * per));
  const int n_val = static_cast<int>(std::lround(0.15 * per));

  for (int g = 0; g < spec.num_classes; ++g) {
    Rng grade_rng = root.split(static_cast<std::uint64_t>(g));
    std::vector<LabeledImage> items;
    items.reserve(per);
    for (int i = 0; i < per; ++i) {
      Rng img_rng = grade_rng.split(static_cast<std::uint64_t>(i) + 1);
      const auto [lo, hi] = spec.blob_counts[g];
      LabeledImage item;
      item.grade = g;
      item.blob_count = img_rng.uniform_int(lo, hi);
      item.image = render_synthetic(spec, item.blob_count, img_rng);
      item.image.source_id = "synth_g" + std::to_string(g) + "_" + std::to_string(i);
      items.push_back(std::move(item));
    }
    Rng shuffle_rng = grade_rng.split(0);
    std::shuffle(items.begin(), items.end(), shuffle_rng);
    for (int i = 0; i < per; ++i) {
      auto& dst = i < n_train ? ds.train : (i < n_train + n_val ? ds.val : ds.test);
      dst.push_back(std::move(items[i]));
    }
  }
  return ds;
}

}  // namespace lqe
