#include "uwash/layers.hpp"

#include <cmath>

#include "uwash/error.hpp"

namespace uwash::nn {

void init_fan_in_uniform(Tensor& w, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.values()) v = rng.uniform(-bound, bound);
}

// Conv1d

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t pad, Rng& rng)
    : weight("weight", Tensor({out_channels, in_channels, kernel})),
      bias("bias", Tensor({out_channels})),
      stride_(stride),
      pad_(pad) {
  init_fan_in_uniform(weight.value, in_channels * kernel, rng);
}

Tensor Conv1d::forward(const Tensor& x, Mode) {
  x_ = x;
  return conv1d_forward(x, weight.value, bias.value, stride_, pad_);
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  if (x_.empty()) throw ShapeError("conv1d backward called before forward");
  auto g = conv1d_backward(grad_out, x_, weight.value, stride_, pad_);
  weight.grad.add(g.grad_w);
  bias.grad.add(g.grad_b);
  return std::move(g.grad_x);
}

Tensor Conv1d::infer(const Tensor& x) const { return conv1d_forward(x, weight.value, bias.value, stride_, pad_); }

void Conv1d::collect(ParamList& out, const std::string& prefix) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
  out.push_back(&weight);
  out.push_back(&bias);
}

void Conv1d::collect(ConstParamList& out) const { out.insert(out.end(), {&weight, &bias}); }

// BatchNorm1d

BatchNorm1d::BatchNorm1d(std::size_t channels)
    : gamma("gamma", Tensor({channels}, 1.0)),
      beta("beta", Tensor({channels})),
      running_mean("running_mean", Tensor({channels}), false),
      running_var("running_var", Tensor({channels}, 1.0), false) {}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode) {
  mode_ = mode;
  if (mode == Mode::train) {
    return batchnorm_train(x, gamma.value, beta.value, kEps, kMomentum, running_mean.value, running_var.value,
                           cache_);
  }
  const std::size_t channels = gamma.value.size();
  cache_.inv_std.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) cache_.inv_std[c] = 1.0 / std::sqrt(running_var.value[c] + kEps);
  cache_.x_hat = Tensor::zeros_like(x);
  for (std::size_t b = 0; b < x.dim(0); ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < x.dim(2); ++t)
        cache_.x_hat.at(b, c, t) = (x.at(b, c, t) - running_mean.value[c]) * cache_.inv_std[c];
  return infer(x);
}

Tensor BatchNorm1d::backward(const Tensor& grad_out) {
  if (mode_ == Mode::train) {
    auto g = batchnorm_backward(grad_out, gamma.value, cache_);
    gamma.grad.add(g.grad_gamma);
    beta.grad.add(g.grad_beta);
    return std::move(g.grad_x);
  }
  // Eval mode: an affine map per channel.
  const Tensor& xh = cache_.x_hat;
  if (!grad_out.same_shape(xh)) throw ShapeError("batchnorm1d backward: grad_out shape mismatch");
  Tensor gx = Tensor::zeros_like(xh);
  for (std::size_t b = 0; b < xh.dim(0); ++b)
    for (std::size_t c = 0; c < xh.dim(1); ++c)
      for (std::size_t t = 0; t < xh.dim(2); ++t) {
        const double g = grad_out.at(b, c, t);
        gamma.grad[c] += g * xh.at(b, c, t);
        beta.grad[c] += g;
        gx.at(b, c, t) = g * gamma.value[c] * cache_.inv_std[c];
      }
  return gx;
}

Tensor BatchNorm1d::infer(const Tensor& x) const {
  return batchnorm_eval(x, gamma.value, beta.value, running_mean.value, running_var.value, kEps);
}

void BatchNorm1d::collect(ParamList& out, const std::string& prefix) {
  gamma.name = prefix + ".gamma";
  beta.name = prefix + ".beta";
  running_mean.name = prefix + ".running_mean";
  running_var.name = prefix + ".running_var";
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

void BatchNorm1d::collect(ConstParamList& out) const {
  out.insert(out.end(), {&gamma, &beta, &running_mean, &running_var});
}

// Activations and pooling

Tensor LeakyRelu::forward(const Tensor& x, Mode) {
  x_ = x;
  return leaky_relu(x, slope_);
}

Tensor LeakyRelu::backward(const Tensor& grad_out) { return leaky_relu_backward(grad_out, x_, slope_); }

Tensor MaxPool1d::forward(const Tensor& x, Mode) {
  in_shape_ = x.shape();
  return maxpool1d(x, window_, stride_, &argmax_);
}

Tensor MaxPool1d::backward(const Tensor& grad_out) { return maxpool1d_backward(grad_out, argmax_, in_shape_); }

// Linear

Linear::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : weight("weight", Tensor({out_features, in_features})), bias("bias", Tensor({out_features})) {
  init_fan_in_uniform(weight.value, in_features, rng);
}

Tensor Linear::forward(const Tensor& x, Mode) {
  x_ = x;
  return linear(x, weight.value, bias.value);
}

Tensor Linear::backward(const Tensor& grad_out) {
  if (x_.empty()) throw ShapeError("linear backward called before forward");
  auto g = linear_backward(grad_out, x_, weight.value);
  weight.grad.add(g.grad_w);
  bias.grad.add(g.grad_b);
  return std::move(g.grad_x);
}

void Linear::collect(ParamList& out, const std::string& prefix) {
  weight.name = prefix + ".weight";
  bias.name = prefix + ".bias";
  out.push_back(&weight);
  out.push_back(&bias);
}

void Linear::collect(ConstParamList& out) const { out.insert(out.end(), {&weight, &bias}); }

// SeBlock

SeBlock::SeBlock(std::size_t channels, std::size_t reduction, double slope, Rng& rng) : act_(slope) {
  if (reduction == 0) throw ShapeError("se_block reduction must be >= 1");
  const std::size_t hidden = (channels + reduction - 1) / reduction;
  squeeze = Linear(channels, hidden, rng);
  expand = Linear(hidden, channels, rng);
}

Tensor SeBlock::forward(const Tensor& x, Mode mode) {
  x_ = x;
  Tensor z = channel_mean(x);
  z = squeeze.forward(z, mode);
  z = act_.forward(z, mode);
  z = expand.forward(z, mode);
  gate_ = sigmoid(z);
  return scale_channels(x, gate_);
}

Tensor SeBlock::backward(const Tensor& grad_out) {
  auto g = scale_channels_backward(grad_out, x_, gate_);
  Tensor gz = sigmoid_backward(g.grad_gate, gate_);
  gz = expand.backward(gz);
  gz = act_.backward(gz);
  gz = squeeze.backward(gz);
  g.grad_x.add(channel_mean_backward(gz, x_.dim(2)));
  return std::move(g.grad_x);
}

Tensor SeBlock::infer(const Tensor& x) const {
  Tensor z = expand.infer(act_.infer(squeeze.infer(channel_mean(x))));
  return scale_channels(x, sigmoid(z));
}

void SeBlock::collect(ParamList& out, const std::string& prefix) {
  squeeze.collect(out, prefix + ".squeeze");
  expand.collect(out, prefix + ".expand");
}

void SeBlock::collect(ConstParamList& out) const {
  squeeze.collect(out);
  expand.collect(out);
}

// PpmBlock

PpmBlock::PpmBlock(std::size_t channels, std::size_t reduced, Rng& rng) : channels_(channels), reduced_(reduced) {
  for (auto& conv : reduce) conv = Conv1d(channels, reduced, 1, 1, 0, rng);
}

namespace {

void check_ppm_input(const Tensor& x, std::size_t channels) {
  if (x.rank() != 3 || x.dim(1) != channels) {
    throw ShapeError("ppm_block expects " + std::to_string(channels) + " channels, got " + x.shape_string());
  }
  if (x.dim(2) % 8 != 0) throw ShapeError("ppm_block temporal length " + std::to_string(x.dim(2)) + " not divisible by 8");
}

}  // namespace

Tensor PpmBlock::forward(const Tensor& x, Mode mode) {
  check_ppm_input(x, channels_);
  in_shape_ = x.shape();
  std::array<Tensor, 3> branches;
  for (std::size_t i = 0; i < kPools.size(); ++i) {
    Tensor p = avgpool1d(x, kPools[i], kPools[i]);
    branches[i] = upsample1d(reduce[i].forward(p, mode), kPools[i]);
  }
  const std::array<const Tensor*, 4> parts = {&x, &branches[0], &branches[1], &branches[2]};
  return concat_channels(parts);
}

Tensor PpmBlock::backward(const Tensor& grad_out) {
  const std::array<std::size_t, 4> widths = {channels_, reduced_, reduced_, reduced_};
  auto parts = split_channels(grad_out, widths);
  Tensor gx = std::move(parts[0]);
  for (std::size_t i = 0; i < kPools.size(); ++i) {
    Tensor g = upsample1d_backward(parts[i + 1], kPools[i]);
    g = reduce[i].backward(g);
    gx.add(avgpool1d_backward(g, in_shape_, kPools[i], kPools[i]));
  }
  return gx;
}

Tensor PpmBlock::infer(const Tensor& x) const {
  check_ppm_input(x, channels_);
  std::array<Tensor, 3> branches;
  for (std::size_t i = 0; i < kPools.size(); ++i) {
    branches[i] = upsample1d(reduce[i].infer(avgpool1d(x, kPools[i], kPools[i])), kPools[i]);
  }
  const std::array<const Tensor*, 4> parts = {&x, &branches[0], &branches[1], &branches[2]};
  return concat_channels(parts);
}

void PpmBlock::collect(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < reduce.size(); ++i) {
    reduce[i].collect(out, prefix + ".pool" + std::to_string(kPools[i]));
  }
}

void PpmBlock::collect(ConstParamList& out) const {
  for (const auto& conv : reduce) conv.collect(out);
}

}  // namespace uwash::nn
