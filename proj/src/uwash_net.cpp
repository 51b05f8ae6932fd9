#include "uwash/uwash_net.hpp"

#include <cmath>

#include "uwash/error.hpp"
#include "uwash/ops.hpp"

namespace uwash {

using nn::Mode;

void ArchConfig::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError("architecture: " + m); };
  if (num_classes != 10) fail("num_classes must be 10");
  if (in_channels_per_branch == 0) fail("in_channels_per_branch must be positive");
  if (encoder_channels.empty()) fail("encoder_channels must not be empty");
  if (decoder_channels.size() != encoder_channels.size()) {
    fail("decoder_channels needs one entry per encoder stage");
  }
  for (int c : encoder_channels)
    if (c <= 0) fail("encoder_channels must be positive");
  for (int c : decoder_channels)
    if (c <= 0) fail("decoder_channels must be positive");
  if (stages() >= 16 || input_length % (std::size_t{1} << stages()) != 0) {
    fail("input_length must be a multiple of 2^stages");
  }
  if (bottleneck_length() == 0 || bottleneck_length() % 8 != 0) {
    fail("bottleneck length input_length / 2^stages must be a positive multiple of 8");
  }
  if (bottleneck_channels != 2 * static_cast<std::size_t>(encoder_channels.back())) {
    fail("bottleneck_channels must equal twice the last encoder width");
  }
  if (ppm_reduce == 0 || se_reduction == 0) fail("ppm_reduce and se_reduction must be positive");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) fail("leaky_slope must be in [0, 1)");
}

KeyValueConfig ArchConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("input_length", static_cast<long long>(input_length));
  kv.set("in_channels_per_branch", static_cast<long long>(in_channels_per_branch));
  kv.set("encoder_channels", encoder_channels);
  kv.set("bottleneck_channels", static_cast<long long>(bottleneck_channels));
  kv.set("ppm_reduce", static_cast<long long>(ppm_reduce));
  kv.set("se_reduction", static_cast<long long>(se_reduction));
  kv.set("decoder_channels", decoder_channels);
  kv.set("num_classes", static_cast<long long>(num_classes));
  kv.set("leaky_slope", leaky_slope);
  return kv;
}

ArchConfig ArchConfig::from_kv(const KeyValueConfig& kv) {
  kv.require_known({"input_length", "in_channels_per_branch", "encoder_channels", "bottleneck_channels", "ppm_reduce",
                    "se_reduction", "decoder_channels", "num_classes", "leaky_slope"});
  ArchConfig c;
  auto count = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("architecture: ") + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.input_length = count("input_length", c.input_length);
  c.in_channels_per_branch = count("in_channels_per_branch", c.in_channels_per_branch);
  c.encoder_channels = kv.get_int_list("encoder_channels", c.encoder_channels);
  c.bottleneck_channels = count("bottleneck_channels", c.bottleneck_channels);
  c.ppm_reduce = count("ppm_reduce", c.ppm_reduce);
  c.se_reduction = count("se_reduction", c.se_reduction);
  c.decoder_channels = kv.get_int_list("decoder_channels", c.decoder_channels);
  c.num_classes = count("num_classes", c.num_classes);
  c.leaky_slope = kv.get_double("leaky_slope", c.leaky_slope);
  c.validate();
  return c;
}

UWashModel UWashModel::build(const ArchConfig& config, std::uint64_t seed) {
  config.validate();
  UWashModel m;
  m.config_ = config;
  Rng rng(seed);
  const std::size_t stages = config.stages();
  const double slope = config.leaky_slope;

  for (Branch* branch : {&m.accel_, &m.gyro_}) {
    std::size_t in = config.in_channels_per_branch;
    for (std::size_t s = 0; s < stages; ++s) {
      const auto out = static_cast<std::size_t>(config.encoder_channels[s]);
      branch->stages.push_back(EncoderStage{nn::Conv1d(in, out, 3, 1, 1, rng), nn::BatchNorm1d(out),
                                            nn::LeakyRelu(slope), nn::MaxPool1d(2, 2)});
      branch->skip_channels.push_back(out);
      in = out;
    }
    branch->se = nn::SeBlock(in, config.se_reduction, slope, rng);
  }
  m.ppm_ = nn::PpmBlock(config.bottleneck_channels, config.ppm_reduce, rng);

  std::size_t up = m.ppm_.out_channels();
  for (std::size_t j = 0; j < stages; ++j) {
    const std::size_t skip = static_cast<std::size_t>(config.encoder_channels[stages - 1 - j]);
    const auto out = static_cast<std::size_t>(config.decoder_channels[j]);
    m.decoder_.push_back(DecoderStage{nn::Conv1d(up + 2 * skip, out, 3, 1, 1, rng), nn::BatchNorm1d(out),
                                      nn::LeakyRelu(slope), {up, skip, skip}});
    up = out;
  }
  m.head_ = nn::Conv1d(up, config.num_classes, 1, 1, 0, rng);
  for (const nn::Param* p : m.params()) {
    m.stored_count_ += p->value.size();
    if (p->trainable) m.parameter_count_ += p->value.size();
  }
  m.round_to_storage_precision();
  return m;
}

void UWashModel::check_inputs(const Tensor& accel, const Tensor& gyro) const {
  const auto expect = [&](const Tensor& x, const char* name) {
    if (x.rank() != 3 || x.dim(1) != config_.in_channels_per_branch || x.dim(2) != config_.input_length) {
      throw ShapeError(std::string(name) + " input must be (B, " + std::to_string(config_.in_channels_per_branch) +
                       ", " + std::to_string(config_.input_length) + "), got " + x.shape_string());
    }
    if (!x.all_finite()) throw Error("uwash-net", std::string(name) + " input contains NaN or Inf");
  };
  expect(accel, "accelerometer");
  expect(gyro, "gyroscope");
  if (accel.dim(0) != gyro.dim(0)) throw ShapeError("accelerometer and gyroscope batch sizes differ");
}

Tensor UWashModel::encode(Branch& branch, const Tensor& x, Mode mode, std::vector<Tensor>& skips) {
  Tensor h = x;
  skips.clear();
  for (auto& st : branch.stages) {
    Tensor c = st.act.forward(st.bn.forward(st.conv.forward(h, mode), mode), mode);
    h = st.pool.forward(c, mode);
    skips.push_back(std::move(c));
  }
  return branch.se.forward(h, mode);
}

Tensor UWashModel::encode_infer(const Branch& branch, const Tensor& x, std::vector<Tensor>& skips) {
  Tensor h = x;
  skips.clear();
  for (const auto& st : branch.stages) {
    Tensor c = st.act.infer(st.bn.infer(st.conv.infer(h)));
    h = st.pool.infer(c);
    skips.push_back(std::move(c));
  }
  return branch.se.infer(h);
}

Tensor UWashModel::encode_backward(Branch& branch, Tensor grad, std::vector<Tensor>& skip_grads) {
  grad = branch.se.backward(grad);
  for (std::size_t s = branch.stages.size(); s-- > 0;) {
    auto& st = branch.stages[s];
    grad = st.pool.backward(grad);
    grad.add(skip_grads[s]);
    grad = st.conv.backward(st.bn.backward(st.act.backward(grad)));
  }
  return grad;
}

Tensor UWashModel::forward(const Tensor& accel, const Tensor& gyro, Mode mode) {
  check_inputs(accel, gyro);
  std::vector<Tensor> skips_a, skips_g;
  const Tensor fa = encode(accel_, accel, mode, skips_a);
  const Tensor fg = encode(gyro_, gyro, mode, skips_g);
  const std::array<const Tensor*, 2> bottleneck = {&fa, &fg};
  Tensor z = ppm_.forward(nn::concat_channels(bottleneck), mode);

  const std::size_t stages = decoder_.size();
  for (std::size_t j = 0; j < stages; ++j) {
    auto& st = decoder_[j];
    const Tensor up = nn::upsample1d(z, 2);
    const std::array<const Tensor*, 3> parts = {&up, &skips_a[stages - 1 - j], &skips_g[stages - 1 - j]};
    z = st.act.forward(st.bn.forward(st.conv.forward(nn::concat_channels(parts), mode), mode), mode);
  }
  Tensor logits = head_.forward(z, mode);
  if (!logits.all_finite()) throw Error("uwash-net", "forward produced non-finite logits");
  return logits;
}

std::pair<Tensor, Tensor> UWashModel::backward(const Tensor& grad_logits) {
  const std::size_t stages = decoder_.size();
  std::vector<Tensor> skip_grads_a(stages), skip_grads_g(stages);
  Tensor g = head_.backward(grad_logits);
  for (std::size_t j = stages; j-- > 0;) {
    auto& st = decoder_[j];
    g = st.conv.backward(st.bn.backward(st.act.backward(g)));
    auto parts = nn::split_channels(g, st.widths);
    skip_grads_a[stages - 1 - j] = std::move(parts[1]);
    skip_grads_g[stages - 1 - j] = std::move(parts[2]);
    g = nn::upsample1d_backward(parts[0], 2);
  }
  g = ppm_.backward(g);
  const std::array<std::size_t, 2> widths = {config_.bottleneck_channels / 2, config_.bottleneck_channels / 2};
  auto halves = nn::split_channels(g, widths);
  Tensor ga = encode_backward(accel_, std::move(halves[0]), skip_grads_a);
  Tensor gg = encode_backward(gyro_, std::move(halves[1]), skip_grads_g);
  return {std::move(ga), std::move(gg)};
}

Tensor UWashModel::predict(const Tensor& accel, const Tensor& gyro, ForwardTrace* trace) const {
  check_inputs(accel, gyro);
  std::vector<Tensor> skips_a, skips_g;
  const Tensor fa = encode_infer(accel_, accel, skips_a);
  const Tensor fg = encode_infer(gyro_, gyro, skips_g);
  const std::array<const Tensor*, 2> bottleneck = {&fa, &fg};
  Tensor z = nn::concat_channels(bottleneck);
  if (trace) trace->bottleneck = z;
  z = ppm_.infer(z);
  if (trace) trace->pyramid = z;

  const std::size_t stages = decoder_.size();
  for (std::size_t j = 0; j < stages; ++j) {
    const auto& st = decoder_[j];
    const Tensor up = nn::upsample1d(z, 2);
    const std::array<const Tensor*, 3> parts = {&up, &skips_a[stages - 1 - j], &skips_g[stages - 1 - j]};
    z = st.act.infer(st.bn.infer(st.conv.infer(nn::concat_channels(parts))));
  }
  return head_.infer(z);
}

void UWashModel::collect_branch(Branch& branch, nn::ParamList& out, const std::string& prefix) {
  for (std::size_t s = 0; s < branch.stages.size(); ++s) {
    const std::string p = prefix + ".enc" + std::to_string(s);
    branch.stages[s].conv.collect(out, p + ".conv");
    branch.stages[s].bn.collect(out, p + ".bn");
  }
  branch.se.collect(out, prefix + ".se");
}

nn::ParamList UWashModel::params() {
  nn::ParamList out;
  collect_branch(accel_, out, "accel");
  collect_branch(gyro_, out, "gyro");
  ppm_.collect(out, "ppm");
  for (std::size_t j = 0; j < decoder_.size(); ++j) {
    const std::string p = "dec" + std::to_string(j);
    decoder_[j].conv.collect(out, p + ".conv");
    decoder_[j].bn.collect(out, p + ".bn");
  }
  head_.collect(out, "head");
  return out;
}

void UWashModel::collect_branch(const Branch& branch, nn::ConstParamList& out) {
  for (const auto& st : branch.stages) {
    st.conv.collect(out);
    st.bn.collect(out);
  }
  branch.se.collect(out);
}

nn::ConstParamList UWashModel::params() const {
  nn::ConstParamList out;
  collect_branch(accel_, out);
  collect_branch(gyro_, out);
  ppm_.collect(out);
  for (const auto& st : decoder_) {
    st.conv.collect(out);
    st.bn.collect(out);
  }
  head_.collect(out);
  return out;
}

void UWashModel::zero_grad() {
  for (nn::Param* p : params()) p->grad.fill(0.0);
}

void UWashModel::round_to_storage_precision() {
  for (nn::Param* p : params())
    for (auto& v : p->value.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace uwash
