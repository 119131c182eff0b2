#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <unistd.h>

namespace lqe::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path base = fs::temp_directory_path();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const fs::path p = base / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("could not create a temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Image random_image(int height, int width, int channels, Rng& rng) {
  Image img(height, width, channels);
  for (double& v : img.pixels) v = static_cast<double>(rng.uniform_int(0, 255));
  return img;
}

Image checkerboard(int side, double lo, double hi) {
  Image img(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = ((x + y) % 2 == 0) ? hi : lo;
  return img;
}

Image disc_image(int side, double cy, double cx, double radius, double value) {
  Image img(side, side, 3);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= radius * radius)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = value;
  return img;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.input_side = 32;
  cfg.backbone_width = 8;
  cfg.query_dim = 16;
  cfg.num_queries = 4;
  cfg.decoder_depth = 1;
  cfg.warmup_epochs = 0.5;
  cfg.synthetic.images_per_grade = 6;
  cfg.synthetic.blob_radius_min = 1.2;
  cfg.synthetic.blob_radius_max = 1.6;
  return cfg;
}

}  // namespace lqe::testing
