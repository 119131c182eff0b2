#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lqe {

/// Dense row-major array of doubles with an explicit shape.
///
/// Matrices are stored as [rows x cols]; spatial feature maps as
/// [side*side x channels] (HWC order, one row per cell).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor vector(std::size_t n, double fill = 0.0) { return Tensor({n}, fill); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
  bool all_finite() const noexcept;

  /// this += scale * other (shapes must match).
  void add_scaled(const Tensor& other, double scale = 1.0);
  void scale(double s);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Ordered collection of named parameter tensors.
///
/// `version()` increments on every mutation through `bump_version()`, which
/// lets forward caches detect that they were produced by stale parameters.
class ParamSet {
 public:
  /// Registers a new tensor; throws InvalidInput if the name already exists.
  std::size_t add(const std::string& name, std::vector<std::size_t> shape);

  std::size_t index(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name_.contains(name); }

  Tensor& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor& get(const std::string& name) { return tensors_[index(name)]; }
  const Tensor& get(const std::string& name) const { return tensors_[index(name)]; }

  const std::string& name(std::size_t i) const { return names_[i]; }
  std::size_t count() const noexcept { return tensors_.size(); }
  std::size_t scalar_count() const noexcept;

  std::uint64_t version() const noexcept { return version_; }
  void bump_version() noexcept { ++version_; }

  /// Zero-filled tensors with the same shapes, in registration order.
  std::vector<Tensor> zeros_like() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::uint64_t version_ = 0;
};

/// Gradient buffers aligned index-for-index with a ParamSet.
using Gradients = std::vector<Tensor>;

void zero_gradients(Gradients& grads);

}  // namespace lqe
