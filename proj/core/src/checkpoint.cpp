#include "lqe/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "lqe/error.hpp"

namespace lqe {

namespace {

constexpr char kMagic[8] = {'L', 'Q', 'E', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string get_string(std::istream& is, std::uint64_t len) {
  if (len > (1ULL << 32)) throw IoError("corrupt checkpoint: implausible string length");
  std::string s(len, '\0');
  if (len && !is.read(s.data(), static_cast<std::streamsize>(len))) throw IoError("truncated checkpoint");
  return s;
}

}  // namespace

const Tensor* TensorArchive::find(const std::string& name) const {
  for (const auto& nt : tensors) {
    if (nt.name == name) return &nt.tensor;
  }
  return nullptr;
}

void save_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint64_t>(os, archive.metadata.size());
  os.write(archive.metadata.data(), static_cast<std::streamsize>(archive.metadata.size()));
  put<std::uint64_t>(os, archive.tensors.size());
  for (const auto& nt : archive.tensors) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (std::size_t d : nt.tensor.shape()) put<std::uint64_t>(os, d);
    for (double v : nt.tensor.values()) put<double>(os, v);
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

TensorArchive load_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  if (get<std::uint32_t>(is) != kFormatVersion) throw IoError("unsupported checkpoint version");
  TensorArchive archive;
  archive.metadata = get_string(is, get<std::uint64_t>(is));
  const auto count = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = get_string(is, get<std::uint32_t>(is));
    const auto rank = get<std::uint32_t>(is);
    if (rank > 8) throw IoError("corrupt checkpoint: rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get<std::uint64_t>(is));
      n *= d;
    }
    if (n > (1ULL << 32)) throw IoError("corrupt checkpoint: tensor too large");
    std::vector<double> data(n);
    for (auto& v : data) v = get<double>(is);
    nt.tensor = Tensor(std::move(shape), std::move(data));
    archive.tensors.push_back(std::move(nt));
  }
  return archive;
}

void append_params(TensorArchive& archive, const std::string& prefix, const ParamSet& params) {
  for (std::size_t i = 0; i < params.count(); ++i) archive.tensors.push_back({prefix + params.name(i), params[i]});
}

void append_tensors(TensorArchive& archive, const std::string& prefix, const ParamSet& layout,
                    const std::vector<Tensor>& tensors) {
  for (std::size_t i = 0; i < layout.count(); ++i) archive.tensors.push_back({prefix + layout.name(i), tensors.at(i)});
}

void restore_params(const TensorArchive& archive, const std::string& prefix, ParamSet& params) {
  for (std::size_t i = 0; i < params.count(); ++i) {
    const Tensor* t = archive.find(prefix + params.name(i));
    if (!t) throw IoError("checkpoint is missing " + prefix + params.name(i));
    if (!t->same_shape(params[i])) throw IoError("checkpoint shape mismatch for " + prefix + params.name(i));
    params[i] = *t;
  }
  params.bump_version();
}

void restore_tensors(const TensorArchive& archive, const std::string& prefix, const ParamSet& layout,
                     std::vector<Tensor>& tensors) {
  tensors.resize(layout.count());
  for (std::size_t i = 0; i < layout.count(); ++i) {
    const Tensor* t = archive.find(prefix + layout.name(i));
    if (!t) throw IoError("checkpoint is missing " + prefix + layout.name(i));
    if (!t->same_shape(layout[i])) throw IoError("checkpoint shape mismatch for " + prefix + layout.name(i));
    tensors[i] = *t;
  }
}

}  // namespace lqe
