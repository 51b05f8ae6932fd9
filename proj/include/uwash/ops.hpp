#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uwash/tensor.hpp"

// Forward kernels and their hand-derived backward passes. Feature maps are
// (batch, channels, time); every backward returns freshly allocated
// gradients and never touches the forward inputs.
namespace uwash::nn {

// Cross-correlation with zero padding. w is (Cout, Cin, K), b is (Cout).
Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);

struct Conv1dGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_b;
};
Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, std::size_t stride,
                            std::size_t pad);

struct BatchNormCache {
  Tensor x_hat;
  std::vector<double> inv_std;
};

// Normalizes with batch statistics over (batch, time) per channel and
// updates the running statistics (running variance uses the unbiased
// estimate). Requires batch * time >= 2.
Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, double momentum,
                       Tensor& running_mean, Tensor& running_var, BatchNormCache& cache);
Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                      const Tensor& running_var, double eps);

struct BatchNormGrads {
  Tensor grad_x;
  Tensor grad_gamma;
  Tensor grad_beta;
};
BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma, const BatchNormCache& cache);

Tensor leaky_relu(const Tensor& x, double slope);
Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& x, double slope);

// `argmax` receives, per output element, the flat input index that won.
Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride, std::vector<std::size_t>* argmax = nullptr);
Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape);

Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride);
Tensor avgpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape, std::size_t window,
                          std::size_t stride);

// Nearest-neighbour upsampling along time.
Tensor upsample1d(const Tensor& x, std::size_t factor);
Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor);

// x is (B, In), w is (Out, In), b is (Out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
struct LinearGrads {
  Tensor grad_x;
  Tensor grad_w;
  Tensor grad_b;
};
LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w);

Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& y);

Tensor concat_channels(std::span<const Tensor* const> parts);
std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> widths);

// Per-channel temporal mean: (B, C, T) -> (B, C).
Tensor channel_mean(const Tensor& x);
Tensor channel_mean_backward(const Tensor& grad_out, std::size_t time);

// out[b,c,t] = x[b,c,t] * gate[b,c]
Tensor scale_channels(const Tensor& x, const Tensor& gate);
struct ScaleGrads {
  Tensor grad_x;
  Tensor grad_gate;
};
ScaleGrads scale_channels_backward(const Tensor& grad_out, const Tensor& x, const Tensor& gate);

// Softmax over the channel axis of (B, C, T) logits.
Tensor softmax(const Tensor& logits);

struct LossResult {
  double loss = 0.0;
  Tensor grad_logits;
  std::size_t correct = 0;  // argmax hits, for accuracy logging
};

// Mean over all B*T samples of -log softmax(logits)[label]. Labels are
// laid out (b, t) row-major.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace uwash::nn
