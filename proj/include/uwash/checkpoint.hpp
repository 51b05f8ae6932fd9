#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uwash/error.hpp"
#include "uwash/uwash_net.hpp"

namespace uwash {

// Binary layout, all integers little-endian:
//   "UWSH" | version u16 | config length u32 | config text
//   | per slot { name length u16 | name | rank u8 | dims u32 x rank | float32 x size }
//   | CRC32 of every preceding byte
inline constexpr std::uint16_t kCheckpointVersion = 1;

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, version_mismatch, truncated, crc_mismatch, layout_mismatch };

  CheckpointError(Kind kind, const std::string& message) : Error("checkpoint", message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct TensorRecord {
  std::string name;
  std::vector<std::size_t> shape;
};

struct CheckpointInfo {
  std::uint16_t version = kCheckpointVersion;
  std::string config_text;
  std::vector<TensorRecord> tensors;
  std::size_t stored_values = 0;
  std::size_t file_bytes = 0;

  std::size_t parameter_bits() const { return 32 * stored_values; }
  std::size_t file_bits() const { return 8 * file_bytes; }
  std::size_t header_bits() const { return file_bits() - parameter_bits(); }
};

std::vector<std::uint8_t> serialize_checkpoint(const UWashModel& model);
UWashModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes, CheckpointInfo* info = nullptr);

CheckpointInfo save_checkpoint(const UWashModel& model, const std::filesystem::path& path);
UWashModel load_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr);

}  // namespace uwash
