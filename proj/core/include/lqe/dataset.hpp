#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lqe/image.hpp"
#include "lqe/imageqc.hpp"

namespace lqe {

struct LabeledImage {
  Image image;
  int grade = 0;
  int blob_count = -1;  // generator ground truth; -1 when loaded from disk
};

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct Dataset {
  int num_classes = 0;
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> val;
  std::vector<LabeledImage> test;

  std::vector<LabeledImage>& split(Split s);
  const std::vector<LabeledImage>& split(Split s) const;
  std::size_t size() const noexcept { return train.size() + val.size() + test.size(); }
};

struct IngestOptions {
  int side = 128;
  bool crop = true;
  CropConfig crop_config{};
};

/// Reads `<dir>/<grade>/<file>` for grade = 0..K-1 in lexicographic file
/// order. Gray images are expanded to three channels; every image is
/// cropped to the retina (when enabled) and resized to side x side.
std::vector<LabeledImage> load_split_dir(const std::filesystem::path& dir, int num_classes,
                                         const IngestOptions& opts = {});

/// Loads `<root>/{train,val,test}`. Missing split directories yield empty splits.
Dataset load_dataset(const std::filesystem::path& root, int num_classes, const IngestOptions& opts = {});

/// Writes `<root>/<split>/<grade>/img_<n>.png` with n counting per split and grade.
void write_dataset(const std::filesystem::path& root, const Dataset& ds);

/// SHA-256 over the sorted (relative path, contents) pairs of every regular file, as hex.
std::string fingerprint_directory(const std::filesystem::path& root);

/// SHA-256 over split, grade, source id and 8-bit pixel values of every image, as hex.
std::string fingerprint_dataset(const Dataset& ds);

/// Converts one ingested image into the model's input layout.
Image prepare_image(const Image& img, const IngestOptions& opts);

}  // namespace lqe
