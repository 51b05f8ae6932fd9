#include "uwash/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace uwash {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

using Kind = CheckpointError::Kind;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { bytes(&v, sizeof v); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::size_t remaining() const { return size_ - pos_; }
  void bytes(void* p, std::size_t n, const char* what) {
    if (n > remaining()) throw CheckpointError(Kind::truncated, std::string("truncated while reading ") + what);
    std::memcpy(p, data_ + pos_, n);
    pos_ += n;
  }
  template <class T>
  T read(const char* what) {
    T v{};
    bytes(&v, sizeof v, what);
    return v;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const UWashModel& model) {
  Writer w;
  w.bytes("UWSH", 4);
  w.u16(kCheckpointVersion);
  const std::string config = model.config().to_kv().serialize();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  for (const nn::Param* p : model.params()) {
    w.u16(static_cast<std::uint16_t>(p->name.size()));
    w.bytes(p->name.data(), p->name.size());
    w.u8(static_cast<std::uint8_t>(p->value.rank()));
    for (auto d : p->value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p->value.values()) w.f32(static_cast<float>(v));
  }
  const std::uint32_t crc = crc32_of(w.buffer().data(), w.buffer().size());
  w.u32(crc);
  return std::move(w.buffer());
}

UWashModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, CheckpointInfo* info) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "UWSH", 4) != 0) {
    throw CheckpointError(Kind::bad_magic, "not a checkpoint (bad magic)");
  }
  if (bytes.size() < 4 + 2 + 4 + 4) throw CheckpointError(Kind::truncated, "truncated header");
  const std::size_t body = bytes.size() - 4;
  Reader r(bytes.data() + 4, body - 4);
  const auto version = r.read<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::version_mismatch, "checkpoint version " + std::to_string(version) +
                                                      " unsupported (expected " +
                                                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto config_len = r.read<std::uint32_t>("config length");
  std::string config_text(config_len, '\0');
  r.bytes(config_text.data(), config_len, "config text");

  CheckpointInfo local;
  CheckpointInfo& meta = info ? *info : local;
  meta = CheckpointInfo{};
  meta.version = version;
  meta.config_text = config_text;
  meta.file_bytes = bytes.size();

  struct Block {
    TensorRecord record;
    std::vector<float> values;
  };
  std::vector<Block> blocks;
  while (r.remaining() > 0) {
    Block b;
    const auto name_len = r.read<std::uint16_t>("tensor name length");
    b.record.name.resize(name_len);
    r.bytes(b.record.name.data(), name_len, "tensor name");
    const auto rank = r.read<std::uint8_t>("tensor rank");
    std::size_t count = 1;
    for (int i = 0; i < rank; ++i) {
      const auto d = r.read<std::uint32_t>("tensor dims");
      b.record.shape.push_back(d);
      count *= d;
    }
    if (count * sizeof(float) > r.remaining()) {
      throw CheckpointError(Kind::truncated, "tensor block '" + b.record.name + "' is truncated");
    }
    b.values.resize(count);
    r.bytes(b.values.data(), count * sizeof(float), "tensor payload");
    meta.stored_values += count;
    meta.tensors.push_back(b.record);
    blocks.push_back(std::move(b));
  }

  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, bytes.data() + body, 4);
  if (crc32_of(bytes.data(), body) != stored_crc) throw CheckpointError(Kind::crc_mismatch, "CRC32 mismatch");

  UWashModel model = UWashModel::build(ArchConfig::from_kv(KeyValueConfig::parse(config_text)), 0);
  auto params = model.params();
  if (params.size() != blocks.size()) {
    throw CheckpointError(Kind::layout_mismatch, "checkpoint holds " + std::to_string(blocks.size()) +
                                                     " tensors, architecture needs " +
                                                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Param& p = *params[i];
    const Block& b = blocks[i];
    if (b.record.name != p.name || b.record.shape != p.value.shape()) {
      throw CheckpointError(Kind::layout_mismatch, "tensor '" + b.record.name + "' " + shape_string(b.record.shape) +
                                                       " does not match '" + p.name + "' " +
                                                       p.value.shape_string());
    }
    for (std::size_t k = 0; k < b.values.size(); ++k) p.value[k] = static_cast<double>(b.values[k]);
  }
  return model;
}

CheckpointInfo save_checkpoint(const UWashModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::io, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "failed writing '" + path.string() + "'");
  CheckpointInfo info;
  deserialize_checkpoint(bytes, &info);
  return info;
}

UWashModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, info);
}

}  // namespace uwash
