#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "uwash/kv_config.hpp"
#include "uwash/layers.hpp"

namespace uwash {

struct ArchConfig {
  std::size_t input_length = 64;
  std::size_t in_channels_per_branch = 3;
  std::vector<int> encoder_channels = {8, 16, 32};
  std::size_t bottleneck_channels = 64;
  std::size_t ppm_reduce = 16;
  std::size_t se_reduction = 4;
  std::vector<int> decoder_channels = {32, 16, 16};
  std::size_t num_classes = 10;
  double leaky_slope = 0.01;

  std::size_t stages() const { return encoder_channels.size(); }
  std::size_t bottleneck_length() const { return input_length >> stages(); }
  std::size_t ppm_channels() const { return bottleneck_channels + 3 * ppm_reduce; }

  // Throws ConfigError when the stage plan cannot produce a valid network.
  void validate() const;

  KeyValueConfig to_kv() const;
  static ArchConfig from_kv(const KeyValueConfig& kv);
};

// Intermediate feature maps, recorded on request by UWashModel::predict.
struct ForwardTrace {
  Tensor bottleneck;  // concatenated SE outputs, before pyramid pooling
  Tensor pyramid;     // after pyramid pooling
};

// Dual-branch 1D U-Net: separate encoders for accelerometer and gyroscope,
// an SE block on each branch's bottleneck, channel concatenation, pyramid
// pooling, and a shared decoder fed with skips from both branches.
class UWashModel {
 public:
  static UWashModel build(const ArchConfig& config, std::uint64_t seed);

  const ArchConfig& config() const { return config_; }

  // Training path; caches activations for backward().
  Tensor forward(const Tensor& accel, const Tensor& gyro, nn::Mode mode);
  // Accumulates parameter gradients; returns (grad_accel, grad_gyro).
  std::pair<Tensor, Tensor> backward(const Tensor& grad_logits);

  // Eval-mode forward with no side effects; safe for concurrent callers.
  Tensor predict(const Tensor& accel, const Tensor& gyro, ForwardTrace* trace = nullptr) const;

  // Every slot in a fixed order with hierarchical names.
  nn::ParamList params();
  nn::ConstParamList params() const;
  void zero_grad();

  std::size_t parameter_count() const { return parameter_count_; }  // trainable values
  // Every saved value, batch-norm running statistics included.
  std::size_t stored_value_count() const { return stored_count_; }

  // Rounds every slot to the nearest 32-bit float, the checkpoint storage
  // precision, so that a saved model predicts exactly as the live one.
  void round_to_storage_precision();

 private:
  struct EncoderStage {
    nn::Conv1d conv;
    nn::BatchNorm1d bn;
    nn::LeakyRelu act;
    nn::MaxPool1d pool;
  };
  struct Branch {
    std::vector<EncoderStage> stages;
    nn::SeBlock se;
    std::vector<std::size_t> skip_channels;
  };
  struct DecoderStage {
    nn::Conv1d conv;
    nn::BatchNorm1d bn;
    nn::LeakyRelu act;
    std::array<std::size_t, 3> widths;  // upsampled, accel skip, gyro skip
  };

  void check_inputs(const Tensor& accel, const Tensor& gyro) const;
  static Tensor encode(Branch& branch, const Tensor& x, nn::Mode mode, std::vector<Tensor>& skips);
  static Tensor encode_infer(const Branch& branch, const Tensor& x, std::vector<Tensor>& skips);
  static Tensor encode_backward(Branch& branch, Tensor grad, std::vector<Tensor>& skip_grads);
  static void collect_branch(Branch& branch, nn::ParamList& out, const std::string& prefix);
  static void collect_branch(const Branch& branch, nn::ConstParamList& out);

  ArchConfig config_;
  Branch accel_, gyro_;
  nn::PpmBlock ppm_;
  std::vector<DecoderStage> decoder_;
  nn::Conv1d head_;
  std::size_t parameter_count_ = 0;
  std::size_t stored_count_ = 0;
};

}  // namespace uwash
