#include "uwash/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "uwash/error.hpp"

namespace uwash {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) throw ShapeError("axis out of range for " + shape_string());
  return shape_[axis];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

void Tensor::add(const Tensor& other) {
  if (!same_shape(other)) {
    throw ShapeError("cannot add " + other.shape_string() + " into " + shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return uwash::shape_string(shape_); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

}  // namespace uwash
