#include <doctest.h>

#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "uwash/pipeline.hpp"

using namespace uwash;

namespace {

SampleSeries noise_series(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> t(n);
  std::vector<Vec3> a(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) / 50.0;
    for (int k = 0; k < 3; ++k) {
      a[i][k] = rng.normal();
      g[i][k] = rng.normal();
    }
  }
  return SampleSeries(SeriesInfo{}, std::move(t), std::move(a), std::move(g), std::vector<int>(n, 0));
}

UWashModel constant_model(int label) {
  auto model = UWashModel::build(ArchConfig{}, 1);
  for (auto* p : model.params()) {
    if (p->name == "head.weight") p->value.fill(0.0);
    if (p->name == "head.bias") {
      p->value.fill(0.0);
      p->value[static_cast<std::size_t>(label)] = 5.0;
    }
  }
  return model;
}

std::vector<int> runs(std::initializer_list<std::pair<int, std::size_t>> parts) {
  std::vector<int> out;
  for (auto [label, n] : parts) out.insert(out.end(), n, label);
  return out;
}

}  // namespace

TEST_CASE("constant model yields a constant track") {
  const auto model = constant_model(3);
  const auto series = noise_series(150, 1);
  for (std::size_t stride : {1u, 64u, 7u}) {
    const auto track = infer_track(model, series, stride);
    CHECK(track.labels == std::vector<int>(150, 3));
  }
}

TEST_CASE("a 64-sample series is a single window") {
  const auto model = UWashModel::build(ArchConfig{}, 2);
  const auto series = noise_series(64, 2);
  const auto windows = predict_windows(model, series, 1);
  REQUIRE(windows.size() == 1);
  CHECK(infer_track(model, series, 64).labels == windows[0].labels);
}

TEST_CASE("stride-1 vote counts equal the number of covering windows") {
  const auto model = UWashModel::build(ArchConfig{}, 2);
  const std::size_t n = 200;
  const auto track = infer_track(model, noise_series(n, 3), 1);
  REQUIRE(track.votes.size() == n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t first = i >= 63 ? i - 63 : 0, last = std::min(i, n - 64);
    const auto total = std::accumulate(track.votes[i].begin(), track.votes[i].end(), 0u);
    REQUIRE(total == last - first + 1);
  }
  CHECK(std::accumulate(track.votes[100].begin(), track.votes[100].end(), 0u) == 64);
}

TEST_CASE("stride-64 track takes each sample's aligned window, the tail only fills the end") {
  const auto model = UWashModel::build(ArchConfig{}, 3);
  const auto series = noise_series(100, 4);
  const auto windows = predict_windows(model, series, 64);
  REQUIRE(windows.size() == 2);
  const auto track = track_from_windows(windows, 100);
  for (std::size_t i = 0; i < 64; ++i) CHECK(track.labels[i] == windows[0].labels[i]);
  for (std::size_t i = 64; i < 100; ++i) CHECK(track.labels[i] == windows[1].labels[i - 36]);
}

TEST_CASE("multiple test voting") {
  LabelTrack t;
  t.labels = {0, 0};
  t.votes.resize(2);
  t.votes[0][3] = 40;
  t.votes[0][0] = 24;
  t.votes[1][2] = 32;
  t.votes[1][5] = 32;
  const auto out = multiple_test_voting(t);
  CHECK(out.labels == std::vector<int>{3, 2});
  LabelTrack no_votes;
  no_votes.labels = {1};
  CHECK_THROWS(multiple_test_voting(no_votes));
}

TEST_CASE("MTV equals a brute-force mode over the covering windows") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40), L = 1 + rng.below(8);
    if (L > n) continue;
    std::vector<WindowPrediction> windows;
    for (std::size_t s = 0; s + L <= n; ++s) {
      WindowPrediction w{s, std::vector<int>(L)};
      for (auto& l : w.labels) l = static_cast<int>(rng.below(4));
      windows.push_back(std::move(w));
    }
    const auto voted = multiple_test_voting(track_from_windows(windows, n));
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<int> seen;
      for (const auto& w : windows)
        if (w.start <= i && i < w.start + L) seen.push_back(w.labels[i - w.start]);
      REQUIRE(voted.labels[i] == oracle::mode_of(seen));
    }
  }
}

TEST_CASE("mode filter examples") {
  const std::vector<int> spike = {1, 1, 1, 2, 1, 1};
  CHECK(mode_filter(spike, 3) == std::vector<int>{1, 1, 1, 1, 1, 1});
  const std::vector<int> constant(50, 4);
  CHECK(mode_filter(constant, 128) == constant);
  // Tie at the left edge of window 2 covers [i-1, i+1): {2, 5} -> 2.
  CHECK(mode_filter(std::vector<int>{5, 2}, 2) == std::vector<int>{5, 2});
  CHECK(mode_filter(std::vector<int>{5, 2, 2}, 4)[0] == 2);
}

TEST_CASE("mode filter equals the brute-force oracle") {
  Rng rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(60), window = 1 + rng.below(20);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(10));
    REQUIRE(mode_filter(labels, window) == oracle::mode_filter(labels, window));
  }
}

TEST_CASE("mode filter is idempotent on runs at least one window long (odd widths)") {
  Rng rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 2 * (1 + rng.below(64)) + 1;
    std::vector<int> labels;
    for (int r = 0; r < 4; ++r) labels.insert(labels.end(), window + rng.below(100), static_cast<int>(rng.below(10)));
    const auto once = mode_filter(labels, window);
    CHECK(once == labels);
    CHECK(mode_filter(once, window) == once);
  }
}

TEST_CASE("even width: ties at a rising edge go to the smaller label") {
  // At the first sample of the 3-run the window holds 64 zeros and 64 threes.
  const auto labels = runs({{0, 200}, {3, 300}, {0, 200}});
  const auto once = mode_filter(labels, 128);
  auto expected = labels;
  expected[200] = 0;
  CHECK(once == expected);
  // Falling edges and run interiors are fixed points.
  CHECK(once[499] == 3);
  CHECK(once[500] == 0);
}

TEST_CASE("isolated spikes inside long runs are always removed at window 128") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t left = 65 + rng.below(100), right = 65 + rng.below(100);
    auto labels = runs({{2, left}, {7, 1}, {2, right}});
    const auto out = mode_filter(labels, 128);
    CHECK(out[left] == 2);
  }
}

TEST_CASE("smoothing composition applies MTV before TMF") {
  const auto model = UWashModel::build(ArchConfig{}, 8);
  const auto track = infer_track(model, noise_series(300, 8), 1);
  const auto both = smooth(track, Smoothing::mtv_tmf, 128);
  CHECK(both.labels == mode_filter(multiple_test_voting(track).labels, 128));
  CHECK(smooth(track, Smoothing::none).labels == track.labels);
  CHECK(parse_smoothing("mtv+tmf") == Smoothing::mtv_tmf);
  CHECK_THROWS(parse_smoothing("median"));
}

TEST_CASE("procedure detection") {
  std::vector<int> labels = runs({{0, 100}});
  for (int g = 1; g <= 8; ++g) labels.insert(labels.end(), 200, g);
  labels.insert(labels.end(), 150, 9);
  labels.insert(labels.end(), 100, 0);
  const auto d = detect_procedure(labels, 50.0);
  CHECK(d.detected);
  CHECK(d.onset_s == doctest::Approx(2.0));
  CHECK(d.offset_s == doctest::Approx(static_cast<double>(labels.size() - 100) / 50.0));

  CHECK_FALSE(detect_procedure(std::vector<int>(500, 0), 50.0).detected);

  const auto gap = runs({{0, 50}, {1, 100}, {0, 10}, {2, 100}, {0, 50}});
  const auto merged = detect_procedure(gap, 50.0);
  CHECK(merged.onset_index == 50);
  CHECK(merged.offset_index == 260);

  // A short stray run far from the main procedure is not part of it.
  const auto stray = runs({{3, 20}, {0, 300}, {1, 400}, {0, 50}});
  const auto main = detect_procedure(stray, 50.0);
  CHECK(main.onset_index == 320);
  CHECK(main.offset_index == 720);
}

TEST_CASE("gesture durations") {
  const auto one = runs({{0, 30}, {1, 245}, {0, 30}});
  CHECK(gesture_durations(one, 50.0).seconds[0] == doctest::Approx(4.9));
  CHECK(gesture_durations(one, 50.0).seconds[3] == 0.0);
  const auto split = runs({{0, 30}, {4, 100}, {5, 20}, {4, 50}, {0, 30}});
  const auto d = gesture_durations(split, 50.0);
  CHECK(d.counts[3] == 150);
  CHECK(d.seconds[3] == doctest::Approx(3.0));
  CHECK(d.background_count == 60);
}

TEST_CASE("gesture segments") {
  const auto segs = gesture_segments(runs({{0, 10}, {2, 50}, {3, 25}, {0, 5}}), 50.0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].label == 2);
  CHECK(segs[0].onset_s == doctest::Approx(0.2));
  CHECK(segs[0].duration_s() == doctest::Approx(1.0));
  CHECK(segs[1].duration_s() == doctest::Approx(0.5));
}

TEST_CASE("track CSV round trip and SVG") {
  const auto path = std::filesystem::temp_directory_path() / "uwash_track_test.csv";
  const std::vector<int> pred = {0, 1, 1, 2}, truth = {0, 1, 2, 2};
  write_track_csv(path, pred, truth, 50.0);
  const auto back = read_track_csv(path);
  CHECK(back.predicted == pred);
  CHECK(back.ground_truth == truth);
  write_track_csv(path, pred, {}, 50.0);
  CHECK(read_track_csv(path).ground_truth.empty());
  std::filesystem::remove(path);
  const auto svg = timeline_svg(pred, truth, 50.0);
  CHECK(svg.rfind("<svg", 0) == 0);
}
