#include "lqe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <memory>
#include <sstream>

#include <openssl/evp.h>

#include "lqe/error.hpp"
#include "lqe/image_io.hpp"

namespace fs = std::filesystem;

namespace lqe {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw InvalidInput("unknown split '" + std::string(name) + "' (expected train, val or test)");
}

std::vector<LabeledImage>& Dataset::split(Split s) {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kVal: return val;
    default: return test;
  }
}

const std::vector<LabeledImage>& Dataset::split(Split s) const {
  return const_cast<Dataset*>(this)->split(s);
}

Image prepare_image(const Image& img, const IngestOptions& opts) {
  check_ingest_image(img);
  Image rgb = img;
  if (img.channels == 1) {
    rgb = Image(img.height, img.width, 3, 0.0, img.source_id);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
      for (int c = 0; c < 3; ++c) rgb.pixels[i * 3 + c] = img.pixels[i];
    }
  }
  Image out;
  if (opts.crop) {
    CropConfig cfg = opts.crop_config;
    cfg.output_side = opts.side;
    out = crop_fundus(rgb, cfg).image;
  } else if (rgb.height != opts.side || rgb.width != opts.side) {
    out = resize_bilinear(rgb, opts.side, opts.side);
  } else {
    out = std::move(rgb);
  }
  out.source_id = img.source_id;
  return out;
}

std::vector<LabeledImage> load_split_dir(const fs::path& dir, int num_classes, const IngestOptions& opts) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<LabeledImage> out;
  for (int g = 0; g < num_classes; ++g) {
    const fs::path grade_dir = dir / std::to_string(g);
    if (!fs::is_directory(grade_dir)) continue;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(grade_dir)) {
      if (entry.is_regular_file() && looks_like_image(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      Image raw = read_image(f);
      raw.source_id = (fs::path(std::to_string(g)) / f.filename()).generic_string();
      out.push_back({prepare_image(raw, opts), g, -1});
    }
  }
  return out;
}

Dataset load_dataset(const fs::path& root, int num_classes, const IngestOptions& opts) {
  if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root.string());
  Dataset ds;
  ds.num_classes = num_classes;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    const fs::path dir = root / to_string(s);
    if (fs::is_directory(dir)) ds.split(s) = load_split_dir(dir, num_classes, opts);
  }
  return ds;
}

void write_dataset(const fs::path& root, const Dataset& ds) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    std::vector<int> counters(ds.num_classes, 0);
    for (int g = 0; g < ds.num_classes; ++g) fs::create_directories(root / to_string(s) / std::to_string(g));
    for (const LabeledImage& item : ds.split(s)) {
      if (item.grade < 0 || item.grade >= ds.num_classes) throw InvalidInput("grade outside dataset range");
      const int n = counters[item.grade]++;
      write_png(root / to_string(s) / std::to_string(item.grade) / ("img_" + std::to_string(n) + ".png"),
                item.image);
    }
  }
}

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 init failed");
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::string hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), digest, &len);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string fingerprint_dataset(const Dataset& ds) {
  Sha256 sha;
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
    for (const LabeledImage& item : ds.split(s)) {
      const std::string header = std::string(to_string(s)) + '\0' + std::to_string(item.grade) + '\0' +
                                 item.image.source_id + '\0' + std::to_string(item.image.height) + 'x' +
                                 std::to_string(item.image.width) + 'x' + std::to_string(item.image.channels) + '\0';
      sha.update(header);
      std::vector<unsigned char> bytes(item.image.pixels.size());
      for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::clamp(std::lround(item.image.pixels[i]), 0L, 255L));
      }
      sha.update(bytes.data(), bytes.size());
    }
  }
  return sha.hex();
}

std::string fingerprint_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("cannot fingerprint missing directory: " + root.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  Sha256 sha;
  for (const fs::path& f : files) {
    const std::string rel = fs::relative(f, root).generic_string();
    std::ifstream in(f, std::ios::binary);
    if (!in) throw IoError("cannot read " + f.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string header = rel + '\0' + std::to_string(bytes.size()) + '\0';
    sha.update(header);
    sha.update(bytes);
  }
  return sha.hex();
}

}  // namespace lqe
