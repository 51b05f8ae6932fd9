#include "uwash/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "uwash/error.hpp"

namespace uwash::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedMap = Eigen::Map<RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstStridedMap = Eigen::Map<const RowMat, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

void require_rank3(const Tensor& x, const char* what) {
  if (x.rank() != 3) throw ShapeError(std::string(what) + " expects (batch, channels, time), got " + x.shape_string());
}

// Output positions t whose input index t*stride + k - pad falls inside [0, T).
struct TapRange {
  std::size_t first = 0;
  std::size_t count = 0;
};

TapRange tap_range(std::size_t k, std::size_t pad, std::size_t stride, std::size_t in_len, std::size_t out_len) {
  // t*stride + k >= pad  and  t*stride + k < in_len + pad
  std::size_t lo = 0;
  if (k < pad) lo = (pad - k + stride - 1) / stride;
  if (k >= in_len + pad) return {};
  std::size_t hi = (in_len + pad - k + stride - 1) / stride;  // exclusive
  hi = std::min(hi, out_len);
  if (hi <= lo) return {};
  return {lo, hi - lo};
}

std::vector<RowMat> split_taps(const Tensor& w) {
  const std::size_t cout = w.dim(0), cin = w.dim(1), k = w.dim(2);
  std::vector<RowMat> taps(k, RowMat(cout, cin));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t j = 0; j < k; ++j) taps[j](o, i) = w[(o * cin + i) * k + j];
  return taps;
}

}  // namespace

Tensor conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  require_rank3(x, "conv1d");
  if (w.rank() != 3) throw ShapeError("conv1d weight must be (Cout, Cin, K), got " + w.shape_string());
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin) {
    throw ShapeError("conv1d input has " + std::to_string(cin) + " channels but weight expects " +
                     std::to_string(w.dim(1)));
  }
  if (b.rank() != 1 || b.dim(0) != cout) throw ShapeError("conv1d bias must be (" + std::to_string(cout) + ")");
  if (stride == 0) throw ShapeError("conv1d stride must be >= 1");
  if (len + 2 * pad < kernel) throw ShapeError("conv1d kernel longer than padded input");
  const std::size_t out_len = (len + 2 * pad - kernel) / stride + 1;

  Tensor y({batch, cout, out_len});
  const auto taps = split_taps(w);
  const Eigen::Map<const Eigen::VectorXd> bias(b.data(), static_cast<Eigen::Index>(cout));
  for (std::size_t n = 0; n < batch; ++n) {
    RowMap out(y.data() + n * cout * out_len, cout, out_len);
    out.colwise() = bias;
    for (std::size_t k = 0; k < kernel; ++k) {
      const auto r = tap_range(k, pad, stride, len, out_len);
      if (r.count == 0) continue;
      const std::size_t s0 = r.first * stride + k - pad;
      ConstStridedMap in(x.data() + n * cin * len + s0, cin, r.count,
                         Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(len, stride));
      out.middleCols(r.first, r.count).noalias() += taps[k] * in;
    }
  }
  return y;
}

Conv1dGrads conv1d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, std::size_t stride,
                            std::size_t pad) {
  require_rank3(x, "conv1d");
  if (x.empty()) throw ShapeError("conv1d backward called without a cached forward input");
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = w.dim(0), kernel = w.dim(2);
  if (w.dim(1) != cin) throw ShapeError("conv1d backward: weight does not match cached input");
  const std::size_t out_len = (len + 2 * pad - kernel) / stride + 1;
  if (grad_out.shape() != std::vector<std::size_t>{batch, cout, out_len}) {
    throw ShapeError("conv1d backward: grad_out " + grad_out.shape_string() + " does not match forward output");
  }

  Conv1dGrads g{Tensor::zeros_like(x), Tensor::zeros_like(w), Tensor({cout})};
  const auto taps = split_taps(w);
  std::vector<RowMat> tap_grads(kernel, RowMat::Zero(cout, cin));
  Eigen::Map<Eigen::VectorXd> grad_bias(g.grad_b.data(), static_cast<Eigen::Index>(cout));
  for (std::size_t n = 0; n < batch; ++n) {
    ConstRowMap go(grad_out.data() + n * cout * out_len, cout, out_len);
    grad_bias += go.rowwise().sum();
    for (std::size_t k = 0; k < kernel; ++k) {
      const auto r = tap_range(k, pad, stride, len, out_len);
      if (r.count == 0) continue;
      const std::size_t s0 = r.first * stride + k - pad;
      const Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic> st(len, stride);
      ConstStridedMap in(x.data() + n * cin * len + s0, cin, r.count, st);
      StridedMap gin(g.grad_x.data() + n * cin * len + s0, cin, r.count, st);
      gin.noalias() += taps[k].transpose() * go.middleCols(r.first, r.count);
      tap_grads[k].noalias() += go.middleCols(r.first, r.count) * in.transpose();
    }
  }
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < cin; ++i)
      for (std::size_t k = 0; k < kernel; ++k) g.grad_w[(o * cin + i) * kernel + k] = tap_grads[k](o, i);
  return g;
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps, double momentum,
                       Tensor& running_mean, Tensor& running_var, BatchNormCache& cache) {
  require_rank3(x, "batchnorm1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw ShapeError("batchnorm1d parameters do not match " + std::to_string(channels) + " channels");
  }
  const std::size_t n = batch * len;
  if (n < 2) throw ShapeError("batchnorm1d in train mode needs batch * time >= 2");

  Tensor y = Tensor::zeros_like(x);
  cache.x_hat = Tensor::zeros_like(x);
  cache.inv_std.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) sum += x.at(b, c, t);
    const double mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        const double d = x.at(b, c, t) - mean;
        sq += d * d;
      }
    const double var = sq / static_cast<double>(n);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    cache.inv_std[c] = inv_std;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        const double xh = (x.at(b, c, t) - mean) * inv_std;
        cache.x_hat.at(b, c, t) = xh;
        y.at(b, c, t) = gamma[c] * xh + beta[c];
      }
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
    running_var[c] = (1.0 - momentum) * running_var[c] +
                     momentum * var * static_cast<double>(n) / static_cast<double>(n - 1);
  }
  return y;
}

Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                      const Tensor& running_var, double eps) {
  require_rank3(x, "batchnorm1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (gamma.size() != channels || running_mean.size() != channels) {
    throw ShapeError("batchnorm1d parameters do not match " + std::to_string(channels) + " channels");
  }
  Tensor y = Tensor::zeros_like(x);
  for (std::size_t c = 0; c < channels; ++c) {
    const double scale = gamma[c] / std::sqrt(running_var[c] + eps);
    const double shift = beta[c] - running_mean[c] * scale;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) y.at(b, c, t) = x.at(b, c, t) * scale + shift;
  }
  return y;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& gamma, const BatchNormCache& cache) {
  const Tensor& xh = cache.x_hat;
  if (xh.empty()) throw ShapeError("batchnorm1d backward called without a cached forward pass");
  if (!grad_out.same_shape(xh)) throw ShapeError("batchnorm1d backward: grad_out shape mismatch");
  const std::size_t batch = xh.dim(0), channels = xh.dim(1), len = xh.dim(2);
  const double n = static_cast<double>(batch * len);
  BatchNormGrads g{Tensor::zeros_like(xh), Tensor({channels}), Tensor({channels})};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_g = 0.0, sum_gxh = 0.0;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        sum_g += grad_out.at(b, c, t);
        sum_gxh += grad_out.at(b, c, t) * xh.at(b, c, t);
      }
    g.grad_beta[c] = sum_g;
    g.grad_gamma[c] = sum_gxh;
    const double k = gamma[c] * cache.inv_std[c] / n;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t t = 0; t < len; ++t) {
        g.grad_x.at(b, c, t) = k * (n * grad_out.at(b, c, t) - sum_g - xh.at(b, c, t) * sum_gxh);
      }
  }
  return g;
}

Tensor leaky_relu(const Tensor& x, double slope) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : slope * v;
  return y;
}

Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& x, double slope) {
  if (!grad_out.same_shape(x)) throw ShapeError("leaky_relu backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] > 0.0 ? g[i] : slope * g[i];
  return g;
}

namespace {

std::size_t pooled_length(std::size_t len, std::size_t window, std::size_t stride, const char* what) {
  if (window == 0 || stride == 0) throw ShapeError(std::string(what) + " window and stride must be >= 1");
  if (len < window) throw ShapeError(std::string(what) + " window longer than input");
  return (len - window) / stride + 1;
}

}  // namespace

Tensor maxpool1d(const Tensor& x, std::size_t window, std::size_t stride, std::vector<std::size_t>* argmax) {
  require_rank3(x, "maxpool1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  const std::size_t out_len = pooled_length(len, window, stride, "maxpool1d");
  Tensor y({batch, channels, out_len});
  if (argmax) argmax->assign(y.size(), 0);
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const double* in = x.data() + bc * len;
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = t * stride;
      for (std::size_t j = 1; j < window; ++j) {
        if (in[t * stride + j] > in[best]) best = t * stride + j;
      }
      y[bc * out_len + t] = in[best];
      if (argmax) (*argmax)[bc * out_len + t] = bc * len + best;
    }
  }
  return y;
}

Tensor maxpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool1d backward called without a matching forward");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride) {
  require_rank3(x, "avgpool1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  const std::size_t out_len = pooled_length(len, window, stride, "avgpool1d");
  Tensor y({batch, channels, out_len});
  const double inv = 1.0 / static_cast<double>(window);
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const double* in = x.data() + bc * len;
    for (std::size_t t = 0; t < out_len; ++t) {
      double sum = 0.0;
      for (std::size_t j = 0; j < window; ++j) sum += in[t * stride + j];
      y[bc * out_len + t] = sum * inv;
    }
  }
  return y;
}

Tensor avgpool1d_backward(const Tensor& grad_out, const std::vector<std::size_t>& input_shape, std::size_t window,
                          std::size_t stride) {
  Tensor g(input_shape);
  require_rank3(g, "avgpool1d");
  const std::size_t len = input_shape[2];
  const std::size_t out_len = pooled_length(len, window, stride, "avgpool1d");
  if (grad_out.shape() != std::vector<std::size_t>{input_shape[0], input_shape[1], out_len}) {
    throw ShapeError("avgpool1d backward: grad_out shape mismatch");
  }
  const double inv = 1.0 / static_cast<double>(window);
  for (std::size_t bc = 0; bc < input_shape[0] * input_shape[1]; ++bc) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const double v = grad_out[bc * out_len + t] * inv;
      for (std::size_t j = 0; j < window; ++j) g[bc * len + t * stride + j] += v;
    }
  }
  return g;
}

Tensor upsample1d(const Tensor& x, std::size_t factor) {
  require_rank3(x, "upsample1d");
  if (factor == 0) throw ShapeError("upsample1d factor must be >= 1");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  Tensor y({batch, channels, len * factor});
  for (std::size_t bc = 0; bc < batch * channels; ++bc)
    for (std::size_t t = 0; t < len * factor; ++t) y[bc * len * factor + t] = x[bc * len + t / factor];
  return y;
}

Tensor upsample1d_backward(const Tensor& grad_out, std::size_t factor) {
  require_rank3(grad_out, "upsample1d");
  if (factor == 0 || grad_out.dim(2) % factor != 0) throw ShapeError("upsample1d backward: bad factor");
  const std::size_t batch = grad_out.dim(0), channels = grad_out.dim(1), len = grad_out.dim(2) / factor;
  Tensor g({batch, channels, len});
  for (std::size_t bc = 0; bc < batch * channels; ++bc)
    for (std::size_t t = 0; t < len * factor; ++t) g[bc * len + t / factor] += grad_out[bc * len * factor + t];
  return g;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 2 || w.rank() != 2) throw ShapeError("linear expects x (B, In) and w (Out, In)");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in) throw ShapeError("linear: x has " + std::to_string(in) + " features, w expects " +
                                       std::to_string(w.dim(1)));
  if (b.rank() != 1 || b.dim(0) != out) throw ShapeError("linear bias must be (" + std::to_string(out) + ")");
  Tensor y({batch, out});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x[n * in + i];
      y[n * out + o] = acc;
    }
  return y;
}

LinearGrads linear_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (grad_out.shape() != std::vector<std::size_t>{batch, out}) throw ShapeError("linear backward: shape mismatch");
  LinearGrads g{Tensor::zeros_like(x), Tensor::zeros_like(w), Tensor({out})};
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t o = 0; o < out; ++o) {
      const double go = grad_out[n * out + o];
      g.grad_b[o] += go;
      for (std::size_t i = 0; i < in; ++i) {
        g.grad_w[o * in + i] += go * x[n * in + i];
        g.grad_x[n * in + i] += go * w[o * in + i];
      }
    }
  return g;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return y;
}

Tensor sigmoid_backward(const Tensor& grad_out, const Tensor& y) {
  if (!grad_out.same_shape(y)) throw ShapeError("sigmoid backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (1.0 - y[i]);
  return g;
}

Tensor concat_channels(std::span<const Tensor* const> parts) {
  if (parts.empty()) throw ShapeError("concat needs at least one input");
  const std::size_t batch = parts.front()->dim(0), len = parts.front()->dim(2);
  std::size_t channels = 0;
  for (const Tensor* p : parts) {
    require_rank3(*p, "concat");
    if (p->dim(0) != batch || p->dim(2) != len) {
      throw ShapeError("concat: " + p->shape_string() + " does not match batch/time of " +
                       parts.front()->shape_string());
    }
    channels += p->dim(1);
  }
  Tensor y({batch, channels, len});
  for (std::size_t b = 0; b < batch; ++b) {
    double* dst = y.data() + b * channels * len;
    for (const Tensor* p : parts) {
      const std::size_t block = p->dim(1) * len;
      std::copy_n(p->data() + b * block, block, dst);
      dst += block;
    }
  }
  return y;
}

std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> widths) {
  require_rank3(x, "split");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  std::size_t total = 0;
  for (auto w : widths) total += w;
  if (total != channels) throw ShapeError("split widths do not sum to " + std::to_string(channels) + " channels");
  std::vector<Tensor> parts;
  parts.reserve(widths.size());
  for (auto w : widths) parts.emplace_back(std::vector<std::size_t>{batch, w, len});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = x.data() + b * channels * len;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const std::size_t block = widths[i] * len;
      std::copy_n(src, block, parts[i].data() + b * block);
      src += block;
    }
  }
  return parts;
}

Tensor channel_mean(const Tensor& x) {
  require_rank3(x, "channel_mean");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  Tensor y({batch, channels});
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    double sum = 0.0;
    for (std::size_t t = 0; t < len; ++t) sum += x[bc * len + t];
    y[bc] = sum / static_cast<double>(len);
  }
  return y;
}

Tensor channel_mean_backward(const Tensor& grad_out, std::size_t time) {
  const std::size_t batch = grad_out.dim(0), channels = grad_out.dim(1);
  Tensor g({batch, channels, time});
  const double inv = 1.0 / static_cast<double>(time);
  for (std::size_t bc = 0; bc < batch * channels; ++bc)
    for (std::size_t t = 0; t < time; ++t) g[bc * time + t] = grad_out[bc] * inv;
  return g;
}

Tensor scale_channels(const Tensor& x, const Tensor& gate) {
  require_rank3(x, "scale_channels");
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (gate.shape() != std::vector<std::size_t>{batch, channels}) throw ShapeError("scale_channels: gate shape mismatch");
  Tensor y = x;
  for (std::size_t bc = 0; bc < batch * channels; ++bc)
    for (std::size_t t = 0; t < len; ++t) y[bc * len + t] *= gate[bc];
  return y;
}

ScaleGrads scale_channels_backward(const Tensor& grad_out, const Tensor& x, const Tensor& gate) {
  const std::size_t batch = x.dim(0), channels = x.dim(1), len = x.dim(2);
  if (!grad_out.same_shape(x)) throw ShapeError("scale_channels backward: shape mismatch");
  ScaleGrads g{Tensor::zeros_like(x), Tensor({batch, channels})};
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      g.grad_x[bc * len + t] = grad_out[bc * len + t] * gate[bc];
      acc += grad_out[bc * len + t] * x[bc * len + t];
    }
    g.grad_gate[bc] = acc;
  }
  return g;
}

Tensor softmax(const Tensor& logits) {
  require_rank3(logits, "softmax");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1), len = logits.dim(2);
  Tensor p = Tensor::zeros_like(logits);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, logits.at(b, c, t));
      double z = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const double e = std::exp(logits.at(b, c, t) - mx);
        p.at(b, c, t) = e;
        z += e;
      }
      for (std::size_t c = 0; c < classes; ++c) p.at(b, c, t) /= z;
    }
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank3(logits, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1), len = logits.dim(2);
  if (labels.size() != batch * len) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(batch * len) + " samples");
  }
  LossResult r;
  r.grad_logits = softmax(logits);
  const double inv_n = 1.0 / static_cast<double>(batch * len);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < len; ++t) {
      const int y = labels[b * len + t];
      if (y < 0 || static_cast<std::size_t>(y) >= classes) {
        throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
      }
      // log-sum-exp directly from the logits keeps saturated samples exact
      double mx = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < classes; ++c) {
        if (logits.at(b, c, t) > mx) {
          mx = logits.at(b, c, t);
          arg = c;
        }
      }
      double z = 0.0;
      for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits.at(b, c, t) - mx);
      total += std::log(z) + mx - logits.at(b, static_cast<std::size_t>(y), t);
      if (arg == static_cast<std::size_t>(y)) ++r.correct;
      for (std::size_t c = 0; c < classes; ++c) {
        double& g = r.grad_logits.at(b, c, t);
        g = (g - (c == static_cast<std::size_t>(y) ? 1.0 : 0.0)) * inv_n;
      }
    }
  r.loss = total * inv_n;
  return r;
}

}  // namespace uwash::nn
