#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace uwash {

// Dense row-major array of doubles, rank 1 to 3. Feature maps use the
// (batch, channels, time) layout.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors.
  double& at(std::size_t b, std::size_t c, std::size_t t) noexcept {
    return data_[(b * shape_[1] + c) * shape_[2] + t];
  }
  double at(std::size_t b, std::size_t c, std::size_t t) const noexcept {
    return data_[(b * shape_[1] + c) * shape_[2] + t];
  }

  void fill(double value);
  void add(const Tensor& other);  // elementwise +=, shapes must match
  bool all_finite() const;
  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  // Aligned so that vectorized kernels split work identically on every run.
  std::vector<double, Eigen::aligned_allocator<double>> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace uwash
