#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "uwash/kv_config.hpp"
#include "uwash/signal_data.hpp"

using namespace uwash;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string csv_rows(std::size_t n, std::size_t bad_label_row = 0, std::size_t duplicate_t_row = 0) {
  std::string s = "t,ax,ay,az,gx,gy,gz,label\n";
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) * 0.02;
    if (duplicate_t_row && i + 1 == duplicate_t_row) t = static_cast<double>(i - 1) * 0.02;
    const int label = (bad_label_row && i + 1 == bad_label_row) ? 10 : static_cast<int>(i % 10);
    s += std::to_string(t) + ",0.1,0.2,9.8,0.01,0.02,0.03," + std::to_string(label) + "\n";
  }
  return s;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

CsvError::Kind error_kind(const fs::path& p) {
  try {
    load_csv(p);
  } catch (const CsvError& e) {
    return e.kind();
  }
  FAIL("expected CsvError");
  return CsvError::Kind::io;
}

SampleSeries constant_series(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i) / 50.0;
  return SampleSeries(SeriesInfo{}, std::move(t), std::vector<Vec3>(n), std::vector<Vec3>(n), std::vector<int>(n));
}

}  // namespace

TEST_CASE("valid CSV loads") {
  TempDir dir("uwash_csv_ok");
  write(dir.path / "a.csv", csv_rows(64));
  const auto s = load_csv(dir.path / "a.csv");
  CHECK(s.size() == 64);
  CHECK(s.label()[13] == 3);
  CHECK(s.accel()[0][2] == doctest::Approx(9.8));
}

TEST_CASE("CSV errors name the failing line") {
  TempDir dir("uwash_csv_bad");
  // Data row 6 is file line 7.
  write(dir.path / "label.csv", csv_rows(20, 6));
  CHECK(error_kind(dir.path / "label.csv") == CsvError::Kind::label_out_of_range);
  try {
    load_csv(dir.path / "label.csv");
  } catch (const CsvError& e) {
    CHECK(e.line() == 7);
    CHECK(std::string(e.what()).find("line 7") != std::string::npos);
  }
  write(dir.path / "dup.csv", csv_rows(20, 0, 5));
  CHECK(error_kind(dir.path / "dup.csv") == CsvError::Kind::non_monotone);
  write(dir.path / "empty.csv", "");
  CHECK(error_kind(dir.path / "empty.csv") == CsvError::Kind::empty_file);
  write(dir.path / "header.csv", "time,ax\n0,1\n");
  CHECK(error_kind(dir.path / "header.csv") == CsvError::Kind::bad_header);
  write(dir.path / "short.csv", "t,ax,ay,az,gx,gy,gz,label\n0,1,2,3\n");
  CHECK(error_kind(dir.path / "short.csv") == CsvError::Kind::malformed_row);
  write(dir.path / "nan.csv", "t,ax,ay,az,gx,gy,gz,label\n0,1,abc,3,4,5,6,0\n");
  CHECK(error_kind(dir.path / "nan.csv") == CsvError::Kind::bad_number);
  CHECK(error_kind(dir.path / "missing.csv") == CsvError::Kind::io);
}

TEST_CASE("series invariants are enforced on construction") {
  CHECK_THROWS_AS(SampleSeries(SeriesInfo{}, {0.0, 0.02}, std::vector<Vec3>(2), std::vector<Vec3>(1), {0, 0}),
                  Error);
  CHECK_THROWS_AS(SampleSeries(SeriesInfo{}, {0.0, 0.0}, std::vector<Vec3>(2), std::vector<Vec3>(2), {0, 0}),
                  Error);
  CHECK_THROWS_AS(SampleSeries(SeriesInfo{}, {}, {}, {}, {}), Error);
}

TEST_CASE("window extraction counts") {
  CHECK(extract_windows(constant_series(128), 64, 1).size() == 65);
  CHECK(extract_windows(constant_series(64), 64, 64).size() == 1);
  const auto w = extract_windows(constant_series(100), 64, 64);
  REQUIRE(w.size() == 2);
  CHECK(w[0].start_index == 0);
  CHECK_FALSE(w[0].tail);
  CHECK(w[1].start_index == 36);
  CHECK(w[1].tail);
  CHECK_THROWS(extract_windows(constant_series(40), 64, 1));
  for (const auto& win : extract_windows(constant_series(300), 64, 7)) CHECK(win.start_index + win.length <= 300);
}

TEST_CASE("dataset file names round trip and order the corpus") {
  const SeriesInfo info{"P007", "L3", 4, 50.0};
  CHECK(dataset_file_name(info) == "L3_P007_4.csv");
  const auto back = parse_dataset_file_name("L3_P007_4.csv");
  CHECK(back.participant_id == "P007");
  CHECK(back.location_id == "L3");
  CHECK(back.procedure_id == 4);
  CHECK_THROWS_AS(parse_dataset_file_name("nonsense.csv"), Error);

  TempDir dir("uwash_dataset");
  std::vector<SampleSeries> corpus;
  for (int proc : {2, 1}) {
    auto base = constant_series(70);
    std::vector<double> t(base.t().begin(), base.t().end());
    corpus.emplace_back(SeriesInfo{"P001", "L1", proc, 50.0}, t, std::vector<Vec3>(70), std::vector<Vec3>(70),
                        std::vector<int>(70, 0));
  }
  write_dataset(corpus, dir.path);
  const auto loaded = load_dataset(dir.path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].procedure_id() == 1);
  CHECK(loaded[1].procedure_id() == 2);
}

TEST_CASE("key-value config parsing") {
  const auto kv = KeyValueConfig::parse("# comment\na = 3\nb = 1.5\nlist = 1, 2, 3\n");
  CHECK(kv.get_int("a", 0) == 3);
  CHECK(kv.get_double("b", 0.0) == 1.5);
  CHECK(kv.get_int_list("list", {}) == std::vector<int>{1, 2, 3});
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(kv.require_known({"a", "b"}), ConfigError);
  CHECK_NOTHROW(kv.require_known({"a", "b", "list"}));
  CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
  CHECK(KeyValueConfig::parse(kv.serialize()).entries() == kv.entries());
  CHECK(std::stod(format_double(0.1)) == 0.1);
}
