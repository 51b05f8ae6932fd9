#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "uwash/checkpoint.hpp"
#include "uwash/layers.hpp"
#include "uwash/uwash_net.hpp"

using namespace uwash;
using namespace uwash::nn;

namespace {

// Trainable values of the default network, counted layer by layer.
std::size_t hand_count(const ArchConfig& c) {
  const auto conv = [](std::size_t in, std::size_t out, std::size_t k) { return out * in * k + out; };
  const auto bn = [](std::size_t ch) { return 2 * ch; };
  std::size_t branch = 0, in = c.in_channels_per_branch;
  for (int ch : c.encoder_channels) {
    branch += conv(in, static_cast<std::size_t>(ch), 3) + bn(static_cast<std::size_t>(ch));
    in = static_cast<std::size_t>(ch);
  }
  const std::size_t hidden = (in + c.se_reduction - 1) / c.se_reduction;
  branch += (in * hidden + hidden) + (hidden * in + in);
  std::size_t total = 2 * branch + 3 * conv(c.bottleneck_channels, c.ppm_reduce, 1);
  std::size_t up = c.ppm_channels();
  for (std::size_t s = 0; s < c.decoder_channels.size(); ++s) {
    const auto skip = static_cast<std::size_t>(c.encoder_channels[c.encoder_channels.size() - 1 - s]);
    const auto out = static_cast<std::size_t>(c.decoder_channels[s]);
    total += conv(up + 2 * skip, out, 3) + bn(out);
    up = out;
  }
  return total + conv(up, c.num_classes, 1);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

TEST_CASE("default model shapes") {
  const auto model = UWashModel::build(ArchConfig{}, 1);
  Rng rng(2);
  const Tensor a = oracle::random_tensor({3, 3, 64}, rng), g = oracle::random_tensor({3, 3, 64}, rng);
  ForwardTrace trace;
  const Tensor y = model.predict(a, g, &trace);
  CHECK(y.shape() == std::vector<std::size_t>{3, 10, 64});
  CHECK(trace.bottleneck.shape() == std::vector<std::size_t>{3, 64, 8});
  CHECK(trace.pyramid.shape() == std::vector<std::size_t>{3, 112, 8});
}

TEST_CASE("parameter count equals the hand count") {
  const ArchConfig c;
  const auto model = UWashModel::build(c, 1);
  CHECK(hand_count(c) == 30410);
  CHECK(model.parameter_count() == hand_count(c));
  // Running mean and variance of every batch-norm layer are stored too.
  const std::size_t bn_channels = 2 * (8 + 16 + 32) + (32 + 16 + 16);
  CHECK(model.stored_value_count() == hand_count(c) + 2 * bn_channels);
}

TEST_CASE("architecture config validation and round trip") {
  ArchConfig c;
  c.input_length = 60;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ArchConfig d;
  d.encoder_channels = {4, 8};
  d.decoder_channels = {8, 4};
  d.input_length = 32;
  d.bottleneck_channels = 16;
  const auto back = ArchConfig::from_kv(KeyValueConfig::parse(d.to_kv().serialize()));
  CHECK(back.encoder_channels == d.encoder_channels);
  CHECK(back.input_length == 32);
  CHECK_THROWS_AS(ArchConfig::from_kv(KeyValueConfig::parse("unknown_key = 3\n")), ConfigError);
}

TEST_CASE("shape and value contract violations throw") {
  auto model = UWashModel::build(ArchConfig{}, 1);
  CHECK_THROWS_AS(model.predict(Tensor({1, 3, 32}), Tensor({1, 3, 32})), ShapeError);
  CHECK_THROWS_AS(model.predict(Tensor({1, 3, 64}), Tensor({2, 3, 64})), ShapeError);
  Tensor bad({1, 3, 64});
  bad[5] = std::nan("");
  CHECK_THROWS(model.predict(bad, Tensor({1, 3, 64})));
}

TEST_CASE("eval output is independent of batch composition") {
  const auto model = UWashModel::build(ArchConfig{}, 4);
  Rng rng(5);
  const Tensor a = oracle::random_tensor({4, 3, 64}, rng), g = oracle::random_tensor({4, 3, 64}, rng);
  const Tensor all = model.predict(a, g);
  // Reverse the batch order.
  Tensor ar({4, 3, 64}), gr({4, 3, 64});
  const std::size_t per = 3 * 64;
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < per; ++i) {
      ar[(3 - b) * per + i] = a[b * per + i];
      gr[(3 - b) * per + i] = g[b * per + i];
    }
  const Tensor rev = model.predict(ar, gr);
  const std::size_t out = 10 * 64;
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < out; ++i) REQUIRE(rev[(3 - b) * out + i] == all[b * out + i]);
  // A single window alone.
  Tensor a1({1, 3, 64}), g1({1, 3, 64});
  for (std::size_t i = 0; i < per; ++i) {
    a1[i] = a[2 * per + i];
    g1[i] = g[2 * per + i];
  }
  const Tensor one = model.predict(a1, g1);
  for (std::size_t i = 0; i < out; ++i) REQUIRE(one[i] == all[2 * out + i]);
}

TEST_CASE("forward and backward leave parameter values unchanged") {
  auto model = UWashModel::build(ArchConfig{}, 6);
  std::vector<Tensor> before;
  for (auto* p : model.params()) before.push_back(p->value);
  Rng rng(7);
  const Tensor a = oracle::random_tensor({2, 3, 64}, rng), g = oracle::random_tensor({2, 3, 64}, rng);
  const Tensor y = model.forward(a, g, Mode::eval);
  model.backward(oracle::random_tensor(y.shape(), rng));
  const auto params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    REQUIRE(params[i]->grad.same_shape(params[i]->value));
    for (std::size_t k = 0; k < before[i].size(); ++k) REQUIRE(params[i]->value[k] == before[i][k]);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  TempDir dir("uwash_ckpt_test");
  const auto model = UWashModel::build(ArchConfig{}, 8);
  const auto info = save_checkpoint(model, dir.path / "a.uwsh");
  CheckpointInfo loaded_info;
  const auto loaded = load_checkpoint(dir.path / "a.uwsh", &loaded_info);
  save_checkpoint(loaded, dir.path / "b.uwsh");
  CHECK(read_bytes(dir.path / "a.uwsh") == read_bytes(dir.path / "b.uwsh"));

  Rng rng(9);
  const Tensor a = oracle::random_tensor({5, 3, 64}, rng), g = oracle::random_tensor({5, 3, 64}, rng);
  const Tensor p0 = model.predict(a, g), p1 = loaded.predict(a, g);
  for (std::size_t i = 0; i < p0.size(); ++i) REQUIRE(p0[i] == p1[i]);

  CHECK(info.stored_values == model.stored_value_count());
  CHECK(info.parameter_bits() == 32 * model.stored_value_count());
  CHECK(info.file_bits() == info.parameter_bits() + info.header_bits());
  CHECK(info.file_bytes == std::filesystem::file_size(dir.path / "a.uwsh"));
  CHECK(loaded_info.file_bytes == info.file_bytes);
}

TEST_CASE("checkpoint corruption is detected") {
  const auto model = UWashModel::build(ArchConfig{}, 8);
  const auto bytes = serialize_checkpoint(model);
  const auto kind_of = [](const std::vector<std::uint8_t>& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    FAIL("no error");
    return CheckpointError::Kind::io;
  };
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(kind_of(magic) == CheckpointError::Kind::bad_magic);
  auto version = bytes;
  version[4] = 9;
  CHECK(kind_of(version) == CheckpointError::Kind::version_mismatch);
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  CHECK(kind_of(truncated) == CheckpointError::Kind::truncated);
  auto flipped = bytes;
  flipped[bytes.size() - 100] ^= 0x10;
  CHECK(kind_of(flipped) == CheckpointError::Kind::crc_mismatch);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.uwsh"), CheckpointError);
}
