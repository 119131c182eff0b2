#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lqe/tensor.hpp"

namespace lqe {

/// Self-describing binary container of named tensors.
///
/// Layout (all integers little-endian):
///   "LQECKPT1" | u32 format version | u64 metadata length | metadata bytes
///   | u64 tensor count | per tensor: u32 name length, name, u32 rank,
///   u64 dims[rank], f64 values (little-endian IEEE-754).
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct TensorArchive {
  std::string metadata;  // free-form, JSON by convention
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
};

void save_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive load_archive(const std::filesystem::path& path);

/// Appends every parameter as "<prefix><name>".
void append_params(TensorArchive& archive, const std::string& prefix, const ParamSet& params);
void append_tensors(TensorArchive& archive, const std::string& prefix, const ParamSet& layout,
                    const std::vector<Tensor>& tensors);

/// Copies "<prefix><name>" entries into matching parameters. Throws IoError if
/// an entry is missing or has a different shape.
void restore_params(const TensorArchive& archive, const std::string& prefix, ParamSet& params);
void restore_tensors(const TensorArchive& archive, const std::string& prefix, const ParamSet& layout,
                     std::vector<Tensor>& tensors);

}  // namespace lqe
