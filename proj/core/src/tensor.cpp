#include "lqe/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "lqe/error.hpp"

namespace lqe {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != element_count(shape_)) {
    throw InvalidInput("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::add_scaled(const Tensor& other, double s) {
  if (other.shape_ != shape_) {
    throw InvalidInput("add_scaled: shape " + shape_string(other.shape_) + " vs " +
                       shape_string(shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

void Tensor::scale(double s) {
  for (double& v : data_) v *= s;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t ParamSet::add(const std::string& name, std::vector<std::size_t> shape) {
  if (by_name_.contains(name)) throw InvalidInput("duplicate parameter name: " + name);
  by_name_.emplace(name, tensors_.size());
  names_.push_back(name);
  tensors_.emplace_back(std::move(shape));
  ++version_;
  return tensors_.size() - 1;
}

std::size_t ParamSet::index(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw InvalidInput("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

std::vector<Tensor> ParamSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.emplace_back(t.shape());
  return out;
}

void zero_gradients(Gradients& grads) {
  for (auto& g : grads) g.fill(0.0);
}

}  // namespace lqe
