#pragma once

#include <filesystem>

#include "lqe/image.hpp"

namespace lqe {

/// Decodes an 8-bit PNG or baseline JPEG (format sniffed from magic bytes).
/// Gray+alpha and RGBA inputs drop alpha; palette PNGs are expanded to RGB.
/// Throws IoError for unreadable or non-image files.
Image read_image(const std::filesystem::path& path);

/// True when the file starts with a PNG or JPEG signature.
bool looks_like_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG (gray for 1 channel, RGB for 3). Values are rounded and
/// clamped to [0,255]; output bytes are a pure function of the pixel values.
void write_png(const std::filesystem::path& path, const Image& img);

}  // namespace lqe
