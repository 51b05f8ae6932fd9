#include "uwash/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "uwash/error.hpp"
#include "uwash/ops.hpp"
#include "uwash/trainer.hpp"

namespace uwash {

namespace {

Error pipeline_error(const std::string& message) { return Error("segmentation-pipeline", message); }

int mode_of(const VoteCounts& counts) {
  int best = 0;
  for (int c = 1; c < kNumClasses; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

}  // namespace

std::vector<WindowPrediction> predict_windows(const UWashModel& model, const SampleSeries& series, std::size_t stride,
                                              std::size_t batch) {
  const std::size_t len = model.config().input_length;
  if (series.size() < len) {
    throw pipeline_error("series of " + std::to_string(series.size()) + " samples is shorter than the " +
                         std::to_string(len) + "-sample window");
  }
  const auto windows = extract_windows(series, len, stride);
  std::vector<WindowPrediction> out;
  out.reserve(windows.size());
  std::vector<const Window*> chunk;
  for (std::size_t start = 0; start < windows.size(); start += batch) {
    const std::size_t end = std::min(windows.size(), start + batch);
    chunk.clear();
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&windows[i]);
    const WindowBatch wb = make_batch(chunk);
    const Tensor logits = model.predict(wb.accel, wb.gyro);
    const std::size_t classes = logits.dim(1);
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      WindowPrediction p{chunk[b]->start_index, std::vector<int>(len)};
      for (std::size_t t = 0; t < len; ++t) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (logits.at(b, c, t) > logits.at(b, best, t)) best = c;
        }
        p.labels[t] = static_cast<int>(best);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

LabelTrack track_from_windows(std::span<const WindowPrediction> windows, std::size_t series_length) {
  LabelTrack track;
  track.labels.assign(series_length, -1);
  track.votes.assign(series_length, VoteCounts{});
  for (const auto& w : windows) {
    if (w.start + w.labels.size() > series_length) throw pipeline_error("window extends past the series end");
    for (std::size_t t = 0; t < w.labels.size(); ++t) {
      const int label = w.labels[t];
      if (label < 0 || label >= kNumClasses) throw pipeline_error("window label out of range");
      ++track.votes[w.start + t][static_cast<std::size_t>(label)];
    }
  }
  // Earliest covering window wins; windows arrive in start order except the
  // tail, which only fills samples nobody else covered.
  std::vector<const WindowPrediction*> ordered;
  for (const auto& w : windows) ordered.push_back(&w);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const WindowPrediction* a, const WindowPrediction* b) { return a->start < b->start; });
  for (const WindowPrediction* w : ordered) {
    for (std::size_t t = 0; t < w->labels.size(); ++t) {
      int& slot = track.labels[w->start + t];
      if (slot < 0) slot = w->labels[t];
    }
  }
  if (std::find(track.labels.begin(), track.labels.end(), -1) != track.labels.end()) {
    throw pipeline_error("windows do not cover every sample");
  }
  return track;
}

LabelTrack infer_track(const UWashModel& model, const SampleSeries& series, std::size_t stride) {
  const auto windows = predict_windows(model, series, stride);
  return track_from_windows(windows, series.size());
}

LabelTrack multiple_test_voting(const LabelTrack& track) {
  if (!track.has_votes() || track.votes.size() != track.labels.size()) {
    throw pipeline_error("multiple test voting needs per-sample vote counts");
  }
  LabelTrack out;
  out.votes = track.votes;
  out.labels.resize(track.size());
  for (std::size_t i = 0; i < track.size(); ++i) out.labels[i] = mode_of(track.votes[i]);
  return out;
}

std::vector<int> mode_filter(std::span<const int> labels, std::size_t window) {
  if (window == 0) throw pipeline_error("mode filter window must be >= 1");
  const std::size_t n = labels.size();
  for (int l : labels)
    if (l < 0 || l >= kNumClasses) throw pipeline_error("mode filter: label " + std::to_string(l) + " out of range");
  std::vector<int> out(n);
  VoteCounts counts{};
  // Current window is [lo, hi).
  std::size_t lo = 0, hi = 0;
  const auto before = static_cast<long long>(window / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const long long first = static_cast<long long>(i) - before;
    const auto want_lo = static_cast<std::size_t>(std::max(0LL, first));
    const auto want_hi = static_cast<std::size_t>(
        std::min(static_cast<long long>(n), first + static_cast<long long>(window)));
    while (hi < want_hi) ++counts[static_cast<std::size_t>(labels[hi++])];
    while (lo < want_lo) --counts[static_cast<std::size_t>(labels[lo++])];
    out[i] = mode_of(counts);
  }
  return out;
}

LabelTrack mode_filter(const LabelTrack& track, std::size_t window) {
  LabelTrack out;
  out.labels = mode_filter(track.labels, window);
  return out;
}

Smoothing parse_smoothing(const std::string& text) {
  if (text == "none") return Smoothing::none;
  if (text == "mtv") return Smoothing::mtv;
  if (text == "tmf") return Smoothing::tmf;
  if (text == "mtv+tmf") return Smoothing::mtv_tmf;
  throw pipeline_error("unknown smoothing '" + text + "' (expected none|mtv|tmf|mtv+tmf)");
}

std::string to_string(Smoothing s) {
  switch (s) {
    case Smoothing::none: return "none";
    case Smoothing::mtv: return "mtv";
    case Smoothing::tmf: return "tmf";
    case Smoothing::mtv_tmf: return "mtv+tmf";
  }
  return "none";
}

LabelTrack smooth(const LabelTrack& track, Smoothing smoothing, std::size_t mode_window) {
  switch (smoothing) {
    case Smoothing::none: return track;
    case Smoothing::mtv: return multiple_test_voting(track);
    case Smoothing::tmf: return mode_filter(track, mode_window);
    case Smoothing::mtv_tmf: return mode_filter(multiple_test_voting(track), mode_window);
  }
  return track;
}

ProcedureDetection detect_procedure(std::span<const int> labels, double rate_hz, std::size_t gap_merge) {
  if (labels.empty()) throw pipeline_error("cannot detect a procedure in an empty track");
  if (!(rate_hz > 0.0)) throw pipeline_error("rate must be positive");

  struct Group {
    std::size_t begin, end, active;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < labels.size();) {
    if (labels[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels[j] != 0) ++j;
    if (!groups.empty() && i - groups.back().end < gap_merge) {
      groups.back().end = j;
      groups.back().active += j - i;
    } else {
      groups.push_back({i, j, j - i});
    }
    i = j;
  }
  ProcedureDetection d;
  if (groups.empty()) return d;
  const Group* best = &groups.front();
  for (const auto& g : groups) {
    if (g.active > best->active) best = &g;
  }
  d.detected = true;
  d.onset_index = best->begin;
  d.offset_index = best->end;
  d.onset_s = static_cast<double>(best->begin) / rate_hz;
  d.offset_s = static_cast<double>(best->end) / rate_hz;
  return d;
}

GestureDurations gesture_durations(std::span<const int> labels, double rate_hz, std::size_t gap_merge) {
  GestureDurations out;
  const auto proc = detect_procedure(labels, rate_hz, gap_merge);
  if (proc.detected) {
    for (std::size_t i = proc.onset_index; i < proc.offset_index; ++i) {
      if (labels[i] > 0) ++out.counts[static_cast<std::size_t>(labels[i] - 1)];
    }
  }
  std::size_t gesture_total = 0;
  for (std::size_t g = 0; g < 9; ++g) {
    gesture_total += out.counts[g];
    out.seconds[g] = static_cast<double>(out.counts[g]) / rate_hz;
  }
  out.background_count = labels.size() - gesture_total;
  out.background_seconds = static_cast<double>(out.background_count) / rate_hz;
  return out;
}

std::vector<GestureSegment> gesture_segments(std::span<const int> labels, double rate_hz) {
  std::vector<GestureSegment> out;
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    if (labels[i] != 0) {
      out.push_back({labels[i], static_cast<double>(i) / rate_hz, static_cast<double>(j) / rate_hz});
    }
    i = j;
  }
  return out;
}

void write_track_csv(const std::filesystem::path& path, std::span<const int> predicted,
                     std::span<const int> ground_truth, double rate_hz) {
  if (!ground_truth.empty() && ground_truth.size() != predicted.size()) {
    throw pipeline_error("ground truth and prediction lengths differ");
  }
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw pipeline_error("cannot write '" + path.string() + "'");
  std::fprintf(f, "index,t,predicted,ground_truth\n");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    if (ground_truth.empty()) {
      std::fprintf(f, "%zu,%.9g,%d,\n", i, t, predicted[i]);
    } else {
      std::fprintf(f, "%zu,%.9g,%d,%d\n", i, t, predicted[i], ground_truth[i]);
    }
  }
  if (std::fclose(f) != 0) throw pipeline_error("failed writing '" + path.string() + "'");
}

TrackFile read_track_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw pipeline_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw pipeline_error(path.string() + ": empty track file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "index,t,predicted,ground_truth") {
    throw pipeline_error(path.string() + ": header must be 'index,t,predicted,ground_truth'");
  }
  TrackFile out;
  std::size_t line_no = 1;
  bool any_truth = false, any_blank = false;
  const auto parse_label = [&](std::string_view field) {
    int v = -1;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || v < 0 || v >= kNumClasses) {
      throw pipeline_error(path.string() + ": line " + std::to_string(line_no) + ": bad label '" +
                           std::string(field) + "'");
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 4) {
      throw pipeline_error(path.string() + ": line " + std::to_string(line_no) + ": expected 4 columns");
    }
    out.predicted.push_back(parse_label(fields[2]));
    if (fields[3].empty()) {
      any_blank = true;
    } else {
      any_truth = true;
      out.ground_truth.push_back(parse_label(fields[3]));
    }
  }
  if (out.predicted.empty()) throw pipeline_error(path.string() + ": no rows");
  if (any_truth && any_blank) throw pipeline_error(path.string() + ": ground_truth column partially blank");
  return out;
}

namespace {

constexpr std::array<const char*, kNumClasses> kPalette = {"#d9d9d9", "#e41a1c", "#377eb8", "#4daf4a", "#984ea3",
                                                           "#ff7f00", "#ffd92f", "#a65628", "#f781bf", "#1b9e77"};

void append_band(std::string& svg, std::span<const int> labels, double y, double scale) {
  for (std::size_t i = 0; i < labels.size();) {
    std::size_t j = i;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.3f\" y=\"%.1f\" width=\"%.3f\" height=\"30\" fill=\"%s\"><title>G%d</title></rect>\n",
                  static_cast<double>(i) * scale, y, static_cast<double>(j - i) * scale,
                  kPalette[static_cast<std::size_t>(labels[i])], labels[i]);
    svg += buf;
    i = j;
  }
}

}  // namespace

std::string timeline_svg(std::span<const int> predicted, std::span<const int> ground_truth, double rate_hz) {
  const double width = 1000.0;
  const double scale = predicted.empty() ? 1.0 : width / static_cast<double>(predicted.size());
  const double height = ground_truth.empty() ? 60.0 : 100.0;
  std::string svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                width + 90.0, height);
  svg += buf;
  svg += "<text x=\"0\" y=\"25\">predicted</text>\n<g transform=\"translate(90,5)\">\n";
  append_band(svg, predicted, 0.0, scale);
  svg += "</g>\n";
  if (!ground_truth.empty()) {
    svg += "<text x=\"0\" y=\"65\">ground truth</text>\n<g transform=\"translate(90,45)\">\n";
    append_band(svg, ground_truth, 0.0, scale);
    svg += "</g>\n";
  }
  std::snprintf(buf, sizeof buf, "<text x=\"90\" y=\"%.0f\">0 s .. %.2f s</text>\n", height - 5.0,
                static_cast<double>(predicted.size()) / rate_hz);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

}  // namespace uwash
