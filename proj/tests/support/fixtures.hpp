#pragma once

#include <filesystem>
#include <string>

#include "lqe/config.hpp"
#include "lqe/image.hpp"
#include "lqe/rng.hpp"

namespace lqe::testing {

/// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "lqe");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

std::string read_bytes(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Image random_image(int height, int width, int channels, Rng& rng);
Image checkerboard(int side, double lo, double hi);
/// Filled disc of `value` on a black frame.
Image disc_image(int side, double cy, double cx, double radius, double value);

/// A model and dataset small enough to train in seconds: 32 px inputs,
/// width-8 backbone, 4 queries of width 16, six images per grade.
TrainConfig tiny_config();

}  // namespace lqe::testing
