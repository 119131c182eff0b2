#include "lqe/imageqc.hpp"

#include <algorithm>
#include <cmath>

#include "lqe/error.hpp"

namespace lqe {

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kNone:
      return "none";
    case RejectReason::kUnderexposed:
      return "underexposed";
    case RejectReason::kBlurry:
      return "blurry";
  }
  return "none";
}

double mean_brightness(const Image& img) {
  check_image(img);
  double sum = 0.0;
  for (double v : img.pixels) sum += v;
  return sum / static_cast<double>(img.pixels.size());
}

double laplacian_variance(const Image& img) {
  check_image(img);
  if (img.height < 3 || img.width < 3) {
    throw InvalidInput("laplacian_variance: image smaller than the 3x3 kernel");
  }
  const std::vector<double> lum = luminance(img);
  const int w = img.width;
  auto px = [&](int y, int x) { return lum[static_cast<std::size_t>(y) * w + x]; };

  std::vector<double> response;
  response.reserve(static_cast<std::size_t>(img.height - 2) * (w - 2));
  for (int y = 1; y + 1 < img.height; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      response.push_back(px(y - 1, x) + px(y + 1, x) + px(y, x - 1) + px(y, x + 1) -
                         4.0 * px(y, x));
    }
  }
  double mean = 0.0;
  for (double r : response) mean += r;
  mean /= static_cast<double>(response.size());
  double var = 0.0;
  for (double r : response) var += (r - mean) * (r - mean);
  return var / static_cast<double>(response.size());
}

namespace {

CropBox find_fundus_box(const Image& img, const CropConfig& cfg, bool& no_foreground) {
  const std::vector<double> lum = luminance(img);
  int top = img.height, bottom = -1, left = img.width, right = -1;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (lum[static_cast<std::size_t>(y) * img.width + x] > cfg.border_threshold) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
        left = std::min(left, x);
        right = std::max(right, x);
      }
    }
  }
  if (bottom < 0) {
    no_foreground = true;
    return {0, 0, img.height, img.width};
  }
  no_foreground = false;
  const int my = static_cast<int>(std::ceil(cfg.margin_fraction * (bottom - top + 1)));
  const int mx = static_cast<int>(std::ceil(cfg.margin_fraction * (right - left + 1)));
  top = std::max(0, top - my);
  left = std::max(0, left - mx);
  bottom = std::min(img.height - 1, bottom + my);
  right = std::min(img.width - 1, right + mx);
  return {top, left, bottom - top + 1, right - left + 1};
}

}  // namespace

CropResult crop_fundus(const Image& img, const CropConfig& cfg) {
  check_image(img);
  CropResult result;
  result.box = find_fundus_box(img, cfg, result.no_foreground);
  result.image = crop(img, result.box.top, result.box.left, result.box.height, result.box.width);
  if (cfg.output_side > 0) {
    result.image = resize_bilinear(result.image, cfg.output_side, cfg.output_side);
  }
  return result;
}

QcVerdict qc_gate(const Image& img, double tau_brightness, double tau_focus,
                  const CropConfig& crop_cfg) {
  if (!(tau_brightness >= 0.0) || !(tau_focus >= 0.0)) {
    throw InvalidInput("qc thresholds must be non-negative");
  }
  QcVerdict v;
  v.brightness = mean_brightness(img);
  v.focus_score = laplacian_variance(img);
  bool no_foreground = false;
  v.crop_box = find_fundus_box(img, crop_cfg, no_foreground);
  if (v.brightness < tau_brightness) {
    v.reject_reason = RejectReason::kUnderexposed;
  } else if (v.focus_score < tau_focus) {
    v.reject_reason = RejectReason::kBlurry;
  }
  v.accepted = v.reject_reason == RejectReason::kNone;
  return v;
}

}  // namespace lqe
