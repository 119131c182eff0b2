#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lqe {

/// H x W x C raster, values on the [0, 255] scale, interleaved channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> pixels;
  std::string source_id;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0, std::string id = {});

  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c = 0) { return pixels[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const { return pixels[index(y, x, c)]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Minimum side accepted by the ingestion layer.
inline constexpr int kMinImageSide = 16;

/// Checks shape consistency, channel count (1 or 3) and the finite [0,255]
/// value range. Throws InvalidInput.
void check_image(const Image& img);
/// check_image plus the ingestion minimum side.
void check_ingest_image(const Image& img);

/// Rec.601 luma, one value per pixel (plain copy for 1-channel input).
std::vector<double> luminance(const Image& img);

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image crop(const Image& img, int top, int left, int height, int width);
Image resize_bilinear(const Image& img, int out_height, int out_width);
/// Separable Gaussian blur with reflected borders; sigma <= 0 returns a copy.
Image gaussian_blur(const Image& img, double sigma);
void clamp_pixels(Image& img, double lo = 0.0, double hi = 255.0);
/// Rounds every value to the nearest integer (8-bit quantization) and clamps.
void quantize_u8(Image& img);

}  // namespace lqe
