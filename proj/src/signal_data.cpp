#include "uwash/signal_data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <tuple>

namespace uwash {

namespace fs = std::filesystem;

SampleSeries::SampleSeries(SeriesInfo info, std::vector<double> t, std::vector<Vec3> accel,
                           std::vector<Vec3> gyro, std::vector<int> label)
    : info_(std::move(info)), t_(std::move(t)), accel_(std::move(accel)), gyro_(std::move(gyro)),
      label_(std::move(label)) {
  if (t_.empty()) throw Error("signal-data", "series must contain at least one sample");
  if (accel_.size() != t_.size() || gyro_.size() != t_.size() || label_.size() != t_.size()) {
    throw Error("signal-data", "series columns differ in length");
  }
  if (!(info_.rate_hz > 0.0)) throw Error("signal-data", "rate_hz must be positive");
  for (std::size_t i = 0; i < t_.size(); ++i) {
    if (label_[i] < 0 || label_[i] >= kNumClasses) {
      throw Error("signal-data", "label " + std::to_string(label_[i]) + " at sample " + std::to_string(i) +
                                     " outside 0..9");
    }
    if (i > 0 && !(t_[i] > t_[i - 1])) {
      throw Error("signal-data", "timestamps not strictly increasing at sample " + std::to_string(i));
    }
  }
}

namespace {

constexpr std::string_view kHeader = "t,ax,ay,az,gx,gy,gz,label";

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  while (true) {
    const auto comma = line.find(',');
    fields.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return fields;
}

double parse_real(std::string_view field, std::size_t line_no, const std::string& file) {
  double value = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw CsvError(CsvError::Kind::bad_number, line_no, "cannot parse '" + std::string(field) + "' as a number", file);
  }
  return value;
}

}  // namespace

SampleSeries load_csv(const fs::path& path, SeriesInfo info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError(CsvError::Kind::io, 0, "cannot open '" + path.string() + "'");

  const std::string file = path.filename().string();
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw CsvError(CsvError::Kind::empty_file, 1, "empty file", file);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kHeader) {
    throw CsvError(CsvError::Kind::bad_header, line_no, "header must be '" + std::string(kHeader) + "'", file);
  }

  std::vector<double> t;
  std::vector<Vec3> accel, gyro;
  std::vector<int> label;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 8) {
      throw CsvError(CsvError::Kind::malformed_row, line_no,
                     "expected 8 columns, found " + std::to_string(fields.size()), file);
    }
    const double ts = parse_real(fields[0], line_no, file);
    if (!t.empty() && !(ts > t.back())) {
      throw CsvError(CsvError::Kind::non_monotone, line_no, "timestamp does not increase", file);
    }
    Vec3 a{}, g{};
    for (int k = 0; k < 3; ++k) {
      a[k] = parse_real(fields[1 + k], line_no, file);
      g[k] = parse_real(fields[4 + k], line_no, file);
    }
    int lab = -1;
    const auto lf = fields[7];
    auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), lab);
    if (ec != std::errc() || ptr != lf.data() + lf.size()) {
      throw CsvError(CsvError::Kind::bad_number, line_no, "label '" + std::string(lf) + "' is not an integer", file);
    }
    if (lab < 0 || lab >= kNumClasses) {
      throw CsvError(CsvError::Kind::label_out_of_range, line_no,
                     "label " + std::to_string(lab) + " outside 0..9", file);
    }
    t.push_back(ts);
    accel.push_back(a);
    gyro.push_back(g);
    label.push_back(lab);
  }
  if (t.empty()) throw CsvError(CsvError::Kind::empty_file, line_no, "no data rows", file);
  return SampleSeries(std::move(info), std::move(t), std::move(accel), std::move(gyro), std::move(label));
}

void write_csv(const SampleSeries& series, const fs::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw CsvError(CsvError::Kind::io, 0, "cannot write '" + path.string() + "'");
  std::fprintf(f, "%s\n", std::string(kHeader).c_str());
  const auto t = series.t();
  const auto a = series.accel();
  const auto g = series.gyro();
  const auto y = series.label();
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::fprintf(f, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", t[i], a[i][0], a[i][1], a[i][2], g[i][0], g[i][1],
                 g[i][2], y[i]);
  }
  if (std::fclose(f) != 0) throw CsvError(CsvError::Kind::io, 0, "failed writing '" + path.string() + "'");
}

std::vector<Window> extract_windows(const SampleSeries& series, std::size_t length, std::size_t stride) {
  if (length == 0) throw Error("signal-data", "window length must be positive");
  if (stride == 0) throw Error("signal-data", "window stride must be >= 1");
  if (length > series.size()) {
    throw Error("signal-data", "window length " + std::to_string(length) + " exceeds series length " +
                                   std::to_string(series.size()));
  }
  std::vector<Window> windows;
  std::size_t start = 0;
  for (; start + length <= series.size(); start += stride) {
    windows.push_back(Window{&series, start, length, false});
  }
  const std::size_t last_end = windows.back().start_index + length;
  if (stride > 1 && last_end < series.size()) {
    windows.push_back(Window{&series, series.size() - length, length, true});
  }
  return windows;
}

std::string dataset_file_name(const SeriesInfo& info) {
  return info.location_id + "_" + info.participant_id + "_" + std::to_string(info.procedure_id) + ".csv";
}

SeriesInfo parse_dataset_file_name(const std::string& file_name) {
  auto bad = [&] { return Error("signal-data", "file name '" + file_name + "' is not <location>_<participant>_<procedure>.csv"); };
  if (file_name.size() < 4 || file_name.substr(file_name.size() - 4) != ".csv") throw bad();
  const std::string stem = file_name.substr(0, file_name.size() - 4);
  const auto first = stem.find('_');
  const auto last = stem.rfind('_');
  if (first == std::string::npos || first == last || first == 0) throw bad();
  SeriesInfo info;
  info.location_id = stem.substr(0, first);
  info.participant_id = stem.substr(first + 1, last - first - 1);
  const std::string proc = stem.substr(last + 1);
  auto [ptr, ec] = std::from_chars(proc.data(), proc.data() + proc.size(), info.procedure_id);
  if (ec != std::errc() || ptr != proc.data() + proc.size() || info.participant_id.empty()) throw bad();
  return info;
}

std::vector<SampleSeries> load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error("signal-data", "dataset directory '" + dir.string() + "' not found");
  std::vector<std::pair<SeriesInfo, fs::path>> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    files.emplace_back(parse_dataset_file_name(entry.path().filename().string()), entry.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first.location_id, a.first.participant_id, a.first.procedure_id) <
           std::tie(b.first.location_id, b.first.participant_id, b.first.procedure_id);
  });
  std::vector<SampleSeries> corpus;
  corpus.reserve(files.size());
  for (auto& [info, path] : files) {
    corpus.push_back(load_csv(path, info));
  }
  if (corpus.empty()) throw Error("signal-data", "dataset directory '" + dir.string() + "' has no CSV files");
  return corpus;
}

void write_dataset(const std::vector<SampleSeries>& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& series : corpus) write_csv(series, dir / dataset_file_name(series.info()));
}

}  // namespace uwash
