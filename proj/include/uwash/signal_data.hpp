#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uwash/error.hpp"

namespace uwash {

inline constexpr int kNumClasses = 10;  // 0 = background, 1..9 = WHO gestures
inline constexpr double kDefaultRateHz = 50.0;
inline constexpr std::size_t kDefaultWindowLength = 64;

using Vec3 = std::array<double, 3>;

class CsvError : public Error {
 public:
  enum class Kind { io, empty_file, bad_header, malformed_row, bad_number, non_monotone, label_out_of_range };

  CsvError(Kind kind, std::size_t line, const std::string& message, const std::string& file = {})
      : Error("signal-data", (file.empty() ? "" : file + ": ") + "line " + std::to_string(line) + ": " + message),
        kind_(kind), line_(line) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

struct SeriesInfo {
  std::string participant_id;
  std::string location_id;
  int procedure_id = 0;
  double rate_hz = kDefaultRateHz;
};

// One labeled recording. Validated on construction and immutable afterwards.
class SampleSeries {
 public:
  SampleSeries(SeriesInfo info, std::vector<double> t, std::vector<Vec3> accel, std::vector<Vec3> gyro,
               std::vector<int> label);

  const SeriesInfo& info() const noexcept { return info_; }
  const std::string& participant_id() const noexcept { return info_.participant_id; }
  const std::string& location_id() const noexcept { return info_.location_id; }
  int procedure_id() const noexcept { return info_.procedure_id; }
  double rate_hz() const noexcept { return info_.rate_hz; }

  std::size_t size() const noexcept { return t_.size(); }
  std::span<const double> t() const noexcept { return t_; }
  std::span<const Vec3> accel() const noexcept { return accel_; }
  std::span<const Vec3> gyro() const noexcept { return gyro_; }
  std::span<const int> label() const noexcept { return label_; }

  double duration_seconds() const noexcept { return static_cast<double>(size()) / info_.rate_hz; }

 private:
  SeriesInfo info_;
  std::vector<double> t_;
  std::vector<Vec3> accel_;
  std::vector<Vec3> gyro_;
  std::vector<int> label_;
};

struct Window {
  const SampleSeries* source = nullptr;
  std::size_t start_index = 0;
  std::size_t length = 0;
  bool tail = false;  // appended to reach the series end; overlaps its predecessor

  std::span<const Vec3> accel_slice() const { return source->accel().subspan(start_index, length); }
  std::span<const Vec3> gyro_slice() const { return source->gyro().subspan(start_index, length); }
  std::span<const int> label_slice() const { return source->label().subspan(start_index, length); }
};

SampleSeries load_csv(const std::filesystem::path& path, SeriesInfo info = {});
void write_csv(const SampleSeries& series, const std::filesystem::path& path);

// Windows at 0, stride, 2*stride, ... plus one end-aligned tail window when
// stride > 1 and the last aligned window stops short of the series end.
std::vector<Window> extract_windows(const SampleSeries& series, std::size_t length, std::size_t stride);

// `<location>_<participant>_<procedure>.csv`
std::string dataset_file_name(const SeriesInfo& info);
SeriesInfo parse_dataset_file_name(const std::string& file_name);

// Every conforming CSV in `dir`, ordered by (location, participant, procedure).
std::vector<SampleSeries> load_dataset(const std::filesystem::path& dir);
void write_dataset(const std::vector<SampleSeries>& corpus, const std::filesystem::path& dir);

}  // namespace uwash
