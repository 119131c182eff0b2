#include "lqe/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "lqe/error.hpp"

namespace lqe {

void AugmentConfig::validate() const {
  for (double p : {clahe_prob, flip_prob, brightness_contrast_prob, hue_sat_prob, noise_prob,
                   blur_prob, mix_prob}) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("augmentation probabilities must be in [0,1]");
  }
  if (!(clahe_clip_limit > 0.0)) throw InvalidInput("clahe_clip_limit must be positive");
  if (clahe_tile_grid < 1) throw InvalidInput("clahe_tile_grid must be >= 1");
  if (mixup_alpha < 0.0 || cutmix_alpha < 0.0) throw InvalidInput("mix alphas must be >= 0");
  for (double m : {brightness_range, contrast_range, hue_degrees, saturation_range,
                   noise_sigma_max, blur_sigma_max}) {
    if (!(m >= 0.0)) throw InvalidInput("augmentation magnitudes must be >= 0");
  }
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig cfg;
  cfg.clahe_prob = cfg.flip_prob = cfg.brightness_contrast_prob = 0.0;
  cfg.hue_sat_prob = cfg.noise_prob = cfg.blur_prob = cfg.mix_prob = 0.0;
  return cfg;
}

MixedSample make_sample(Image image, int label, int num_classes) {
  if (num_classes < 2 || label < 0 || label >= num_classes) {
    throw InvalidInput("label out of range for make_sample");
  }
  MixedSample s;
  s.image = std::move(image);
  s.class_target.assign(num_classes, 0.0);
  s.class_target[label] = 1.0;
  return s;
}

namespace {

constexpr int kBins = 256;
using Lut = std::array<double, kBins>;

int bin_of(double v) { return static_cast<int>(std::clamp(std::lround(v), 0L, 255L)); }

Lut tile_lut(const std::vector<double>& lum, int width, int y0, int y1, int x0, int x1,
             double clip_limit) {
  std::array<double, kBins> hist{};
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) hist[bin_of(lum[static_cast<std::size_t>(y) * width + x])] += 1.0;
  const double n = static_cast<double>(y1 - y0) * (x1 - x0);

  Lut lut{};
  const auto occupied = std::count_if(hist.begin(), hist.end(), [](double h) { return h > 0.0; });
  if (occupied <= 1) {
    for (int b = 0; b < kBins; ++b) lut[b] = b;
    return lut;
  }
  if (std::isfinite(clip_limit)) {
    const double limit = std::max(1.0, clip_limit * n / kBins);
    double excess = 0.0;
    for (double& h : hist) {
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
    for (double& h : hist) h += excess / kBins;
  }
  double cdf = 0.0;
  double cdf_min = -1.0;
  for (int b = 0; b < kBins; ++b) {
    cdf += hist[b];
    if (cdf_min < 0.0 && hist[b] > 0.0) cdf_min = cdf;
    lut[b] = cdf;
  }
  const double denom = n - cdf_min;
  for (int b = 0; b < kBins; ++b) {
    lut[b] = denom > 0.0 ? std::clamp(255.0 * (lut[b] - cdf_min) / denom, 0.0, 255.0) : b;
  }
  return lut;
}

}  // namespace

Image apply_clahe(const Image& img, double clip_limit, int tile_grid) {
  check_image(img);
  if (tile_grid < 1) throw InvalidInput("tile_grid must be >= 1");
  if (!(clip_limit > 0.0)) throw InvalidInput("clip_limit must be positive");
  int grid = tile_grid;
  if (img.height / grid < 2 || img.width / grid < 2) grid = 1;

  const std::vector<double> lum = luminance(img);
  std::vector<int> ry(grid + 1), rx(grid + 1);
  for (int i = 0; i <= grid; ++i) {
    ry[i] = i * img.height / grid;
    rx[i] = i * img.width / grid;
  }
  std::vector<Lut> luts(static_cast<std::size_t>(grid) * grid);
  for (int ty = 0; ty < grid; ++ty)
    for (int tx = 0; tx < grid; ++tx)
      luts[ty * grid + tx] = tile_lut(lum, img.width, ry[ty], ry[ty + 1], rx[tx], rx[tx + 1], clip_limit);

  // Tile centres in pixel coordinates.
  std::vector<double> cy(grid), cx(grid);
  for (int i = 0; i < grid; ++i) {
    cy[i] = 0.5 * (ry[i] + ry[i + 1] - 1);
    cx[i] = 0.5 * (rx[i] + rx[i + 1] - 1);
  }
  auto locate = [](const std::vector<double>& centres, double p, int& i0, int& i1, double& t) {
    const int g = static_cast<int>(centres.size());
    if (p <= centres.front()) {
      i0 = i1 = 0;
      t = 0.0;
      return;
    }
    if (p >= centres.back()) {
      i0 = i1 = g - 1;
      t = 0.0;
      return;
    }
    i0 = 0;
    while (i0 + 1 < g && centres[i0 + 1] <= p) ++i0;
    i1 = i0 + 1;
    t = (p - centres[i0]) / (centres[i1] - centres[i0]);
  };

  Image out = img;
  for (int y = 0; y < img.height; ++y) {
    int y0, y1;
    double wy;
    locate(cy, y, y0, y1, wy);
    for (int x = 0; x < img.width; ++x) {
      int x0, x1;
      double wx;
      locate(cx, x, x0, x1, wx);
      const double l = lum[static_cast<std::size_t>(y) * img.width + x];
      const int b = bin_of(l);
      const double top = (1 - wx) * luts[y0 * grid + x0][b] + wx * luts[y0 * grid + x1][b];
      const double bot = (1 - wx) * luts[y1 * grid + x0][b] + wx * luts[y1 * grid + x1][b];
      const double mapped = (1 - wy) * top + wy * bot;
      if (img.channels == 1) {
        out.at(y, x) = mapped;
      } else {
        // Replacing luma in YCbCr is a uniform shift of R, G and B.
        const double shift = mapped - l;
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, c) + shift;
      }
    }
  }
  clamp_pixels(out);
  return out;
}

namespace {

void brightness_contrast(Image& img, double brightness, double contrast) {
  double mean = 0.0;
  for (double v : img.pixels) mean += v;
  mean /= static_cast<double>(img.pixels.size());
  for (double& v : img.pixels) v = (v - mean) * (1.0 + contrast) + mean * (1.0 + brightness);
}

void hue_saturation(Image& img, double hue_radians, double saturation) {
  if (img.channels != 3) return;
  const double cs = std::cos(hue_radians) * (1.0 + saturation);
  const double sn = std::sin(hue_radians) * (1.0 + saturation);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    double* p = img.pixels.data() + i * 3;
    // RGB -> YIQ, rotate and scale the chroma plane, back to RGB.
    const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    const double ci = 0.596 * p[0] - 0.274 * p[1] - 0.322 * p[2];
    const double cq = 0.211 * p[0] - 0.523 * p[1] + 0.312 * p[2];
    const double ri = cs * ci - sn * cq;
    const double rq = sn * ci + cs * cq;
    p[0] = y + 0.956 * ri + 0.621 * rq;
    p[1] = y - 0.272 * ri - 0.647 * rq;
    p[2] = y - 1.106 * ri + 1.703 * rq;
  }
}

}  // namespace

Image apply_photometric(const Image& img, const AugmentConfig& cfg, Rng& rng) {
  check_image(img);
  cfg.validate();
  Image out = img;
  if (rng.bernoulli(cfg.clahe_prob)) out = apply_clahe(out, cfg.clahe_clip_limit, cfg.clahe_tile_grid);
  if (rng.bernoulli(cfg.brightness_contrast_prob)) {
    const double b = rng.uniform(-cfg.brightness_range, cfg.brightness_range);
    const double c = rng.uniform(-cfg.contrast_range, cfg.contrast_range);
    brightness_contrast(out, b, c);
  }
  if (rng.bernoulli(cfg.hue_sat_prob)) {
    const double h = rng.uniform(-cfg.hue_degrees, cfg.hue_degrees) * std::numbers::pi / 180.0;
    const double s = rng.uniform(-cfg.saturation_range, cfg.saturation_range);
    hue_saturation(out, h, s);
  }
  if (rng.bernoulli(cfg.noise_prob)) {
    const double sigma = rng.uniform(0.0, cfg.noise_sigma_max);
    for (double& v : out.pixels) v += sigma * rng.normal();
  }
  if (rng.bernoulli(cfg.blur_prob)) {
    out = gaussian_blur(out, rng.uniform(0.1, std::max(0.1, cfg.blur_sigma_max)));
  }
  if (rng.bernoulli(cfg.flip_prob)) out = flip_horizontal(out);
  if (rng.bernoulli(cfg.flip_prob)) out = flip_vertical(out);
  clamp_pixels(out);
  return out;
}

namespace {

void check_pair(const MixedSample& a, const MixedSample& b) {
  if (a.image.height != b.image.height || a.image.width != b.image.width ||
      a.image.channels != b.image.channels) {
    throw InvalidInput("mix partners must share image shape");
  }
  if (a.class_target.size() != b.class_target.size()) {
    throw InvalidInput("mix partners must share class count");
  }
}

std::vector<double> blend_targets(const MixedSample& a, const MixedSample& b, double lambda) {
  std::vector<double> t(a.class_target.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = lambda * a.class_target[i] + (1.0 - lambda) * b.class_target[i];
  }
  return t;
}

}  // namespace

MixedSample mixup_with_lambda(const MixedSample& a, const MixedSample& b, double lambda) {
  check_pair(a, b);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidInput("mix lambda must be in [0,1]");
  if (lambda == 1.0) return a;
  MixedSample out;
  out.image = a.image;
  for (std::size_t i = 0; i < out.image.pixels.size(); ++i) {
    out.image.pixels[i] = lambda * a.image.pixels[i] + (1.0 - lambda) * b.image.pixels[i];
  }
  clamp_pixels(out.image);
  out.class_target = blend_targets(a, b, lambda);
  out.mix_lambda = lambda;
  out.partner_id = b.image.source_id;
  return out;
}

MixedSample mixup(const MixedSample& a, const MixedSample& b, double alpha, Rng& rng) {
  check_pair(a, b);
  if (alpha < 0.0) throw InvalidInput("mixup alpha must be >= 0");
  const double lambda = alpha == 0.0 ? 1.0 : rng.beta(alpha, alpha);
  return mixup_with_lambda(a, b, lambda);
}

MixedSample cutmix_with_box(const MixedSample& a, const MixedSample& b, const CropBox& box) {
  check_pair(a, b);
  const Image& ia = a.image;
  if (box.height < 0 || box.width < 0 || box.top < 0 || box.left < 0 ||
      box.top + box.height > ia.height || box.left + box.width > ia.width) {
    throw InvalidInput("cutmix box outside image bounds");
  }
  const double area = static_cast<double>(box.height) * box.width;
  if (area == 0.0) return a;
  MixedSample out;
  out.image = ia;
  for (int y = box.top; y < box.top + box.height; ++y)
    for (int x = box.left; x < box.left + box.width; ++x)
      for (int c = 0; c < ia.channels; ++c) out.image.at(y, x, c) = b.image.at(y, x, c);
  const double lambda = 1.0 - area / (static_cast<double>(ia.height) * ia.width);
  out.class_target = blend_targets(a, b, lambda);
  out.mix_lambda = lambda;
  out.partner_id = b.image.source_id;
  return out;
}

MixedSample cutmix(const MixedSample& a, const MixedSample& b, double alpha, Rng& rng) {
  check_pair(a, b);
  if (alpha < 0.0) throw InvalidInput("cutmix alpha must be >= 0");
  const double lambda0 = alpha == 0.0 ? 1.0 : rng.beta(alpha, alpha);
  const int h = a.image.height;
  const int w = a.image.width;
  const double ratio = std::sqrt(1.0 - lambda0);
  const int cut_h = static_cast<int>(std::lround(h * ratio));
  const int cut_w = static_cast<int>(std::lround(w * ratio));
  const int cy = rng.uniform_int(0, h - 1);
  const int cx = rng.uniform_int(0, w - 1);
  const int top = std::clamp(cy - cut_h / 2, 0, h);
  const int left = std::clamp(cx - cut_w / 2, 0, w);
  const int bottom = std::clamp(cy + cut_h - cut_h / 2, 0, h);
  const int right = std::clamp(cx + cut_w - cut_w / 2, 0, w);
  return cutmix_with_box(a, b, {top, left, bottom - top, right - left});
}

}  // namespace lqe
