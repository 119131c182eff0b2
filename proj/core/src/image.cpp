#include "lqe/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqe/error.hpp"

namespace lqe {

Image::Image(int h, int w, int c, double fill, std::string id)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(std::max(h, 0)) * std::max(w, 0) * std::max(c, 0), fill),
      source_id(std::move(id)) {}

void check_image(const Image& img) {
  if (img.height <= 0 || img.width <= 0 || img.pixels.empty()) {
    throw InvalidInput("empty image" + (img.source_id.empty() ? "" : ": " + img.source_id));
  }
  if (img.channels != 1 && img.channels != 3) {
    throw InvalidInput("image must have 1 or 3 channels, got " + std::to_string(img.channels));
  }
  if (img.pixels.size() != img.pixel_count() * img.channels) {
    throw InvalidInput("image pixel buffer does not match its shape");
  }
  for (double v : img.pixels) {
    if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
      throw InvalidInput("image values must be finite and within [0,255]");
    }
  }
}

void check_ingest_image(const Image& img) {
  check_image(img);
  if (img.height < kMinImageSide || img.width < kMinImageSide) {
    throw InvalidInput("image smaller than " + std::to_string(kMinImageSide) + "x" +
                       std::to_string(kMinImageSide) + ": " + img.source_id);
  }
}

std::vector<double> luminance(const Image& img) {
  std::vector<double> out(img.pixel_count());
  if (img.channels == 1) {
    std::copy(img.pixels.begin(), img.pixels.end(), out.begin());
    return out;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double* p = img.pixels.data() + i * img.channels;
    out[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
  return out;
}

Image crop(const Image& img, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > img.height ||
      left + width > img.width) {
    throw InvalidInput("crop box outside image bounds");
  }
  Image out(height, width, img.channels, 0.0, img.source_id);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
  return out;
}

Image resize_bilinear(const Image& img, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) throw InvalidInput("resize target must be positive");
  if (out_height == img.height && out_width == img.width) return img;
  Image out(out_height, out_width, img.channels, 0.0, img.source_id);
  const double sy = static_cast<double>(img.height) / out_height;
  const double sx = static_cast<double>(img.width) / out_width;
  for (int y = 0; y < out_height; ++y) {
    // Pixel-center alignment.
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
        const double bot = (1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
        out.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

}  // namespace

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (double& k : kernel) k /= sum;

  Image tmp(img.height, img.width, img.channels, 0.0, img.source_id);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * img.at(y, reflect(x + k, img.width), c);
        tmp.at(y, x, c) = acc;
      }
  Image out(img.height, img.width, img.channels, 0.0, img.source_id);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
          acc += kernel[k + radius] * tmp.at(reflect(y + k, img.height), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

void clamp_pixels(Image& img, double lo, double hi) {
  for (double& v : img.pixels) v = std::clamp(v, lo, hi);
}

void quantize_u8(Image& img) {
  for (double& v : img.pixels) v = std::clamp(std::round(v), 0.0, 255.0);
}

}  // namespace lqe
