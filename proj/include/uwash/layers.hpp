#pragma once

#include <array>
#include <string>
#include <vector>

#include "uwash/ops.hpp"
#include "uwash/rng.hpp"
#include "uwash/tensor.hpp"

namespace uwash::nn {

enum class Mode { train, eval };

// A named parameter with its gradient. Frozen slots (batch-norm running
// statistics) are saved with the model but never optimized or
// gradient-checked.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), trainable(train) {}
};

using ParamList = std::vector<Param*>;
using ConstParamList = std::vector<const Param*>;

// Weights drawn uniformly from +-1/sqrt(fan_in).
void init_fan_in_uniform(Tensor& w, std::size_t fan_in, Rng& rng);

class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
         std::size_t pad, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix);
  void collect(ConstParamList& out) const;

  Param weight, bias;

 private:
  std::size_t stride_ = 1, pad_ = 0;
  Tensor x_;
};

class BatchNorm1d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm1d() = default;
  explicit BatchNorm1d(std::size_t channels);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix);
  void collect(ConstParamList& out) const;

  Param gamma, beta, running_mean, running_var;

 private:
  Mode mode_ = Mode::train;
  BatchNormCache cache_;
};

class LeakyRelu {
 public:
  explicit LeakyRelu(double slope = 0.01) : slope_(slope) {}
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const { return leaky_relu(x, slope_); }

 private:
  double slope_;
  Tensor x_;
};

class MaxPool1d {
 public:
  MaxPool1d(std::size_t window = 2, std::size_t stride = 2) : window_(window), stride_(stride) {}
  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const { return maxpool1d(x, window_, stride_); }

 private:
  std::size_t window_, stride_;
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const { return linear(x, weight.value, bias.value); }
  void collect(ParamList& out, const std::string& prefix);
  void collect(ConstParamList& out) const;

  Param weight, bias;

 private:
  Tensor x_;
};

// Squeeze-and-excitation: temporal mean per channel, a two-layer gating
// network (C -> C/r -> C) and a per-channel rescale of the input.
class SeBlock {
 public:
  SeBlock() = default;
  SeBlock(std::size_t channels, std::size_t reduction, double slope, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix);
  void collect(ConstParamList& out) const;

  Linear squeeze, expand;

 private:
  LeakyRelu act_;
  Tensor x_, gate_;
};

// Pyramid pooling: average pools with windows 8, 4 and 2, a 1x1 reduction
// per branch, nearest upsampling back to the input length, and channel
// concatenation [input | branch8 | branch4 | branch2].
class PpmBlock {
 public:
  static constexpr std::array<std::size_t, 3> kPools = {8, 4, 2};

  PpmBlock() = default;
  PpmBlock(std::size_t channels, std::size_t reduced, Rng& rng);

  Tensor forward(const Tensor& x, Mode mode);
  Tensor backward(const Tensor& grad_out);
  Tensor infer(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix);
  void collect(ConstParamList& out) const;

  std::size_t out_channels() const { return channels_ + kPools.size() * reduced_; }

  std::array<Conv1d, 3> reduce;

 private:
  std::size_t channels_ = 0, reduced_ = 0;
  std::vector<std::size_t> in_shape_;
};

}  // namespace uwash::nn
