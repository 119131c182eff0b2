#pragma once

#include <string_view>

#include "lqe/image.hpp"

namespace lqe {

struct CropBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  friend bool operator==(const CropBox&, const CropBox&) = default;
};

enum class RejectReason { kNone, kUnderexposed, kBlurry };

std::string_view to_string(RejectReason reason);

struct QcVerdict {
  double brightness = 0.0;
  double focus_score = 0.0;
  CropBox crop_box;
  bool accepted = false;
  RejectReason reject_reason = RejectReason::kNone;
};

struct QcThresholds {
  double brightness = 15.0;  // tau_B on the [0,255] scale
  double focus = 50.0;       // minimum Laplacian variance
};

struct CropConfig {
  double border_threshold = 10.0;  // luminance above which a pixel counts as retina
  double margin_fraction = 0.02;   // added on each side, relative to the box side
  int output_side = 512;           // <= 0 keeps the cropped size
};

struct CropResult {
  Image image;
  CropBox box;
  bool no_foreground = false;  // nothing exceeded the threshold; full frame returned
};

/// Mean over all pixels and channels: (1/3N) * sum(R+G+B), or the plain mean for gray.
double mean_brightness(const Image& img);

/// Population variance of the 4-neighbour Laplacian response of the luma
/// channel, evaluated on the valid interior (no padding).
double laplacian_variance(const Image& img);

/// Tight box around above-threshold luma, expanded by the margin and clipped.
/// Falls back to the full frame (no_foreground=true) when nothing qualifies.
CropResult crop_fundus(const Image& img, const CropConfig& cfg = {});

/// Accepts iff brightness >= tau_brightness and focus >= tau_focus.
/// Underexposure is reported ahead of blur when both fail.
QcVerdict qc_gate(const Image& img, double tau_brightness, double tau_focus,
                  const CropConfig& crop_cfg = {});
inline QcVerdict qc_gate(const Image& img, const QcThresholds& t = {}) {
  return qc_gate(img, t.brightness, t.focus);
}

}  // namespace lqe
