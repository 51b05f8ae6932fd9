#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uwash/signal_data.hpp"
#include "uwash/uwash_net.hpp"

namespace uwash {

using VoteCounts = std::array<std::uint32_t, kNumClasses>;

struct LabelTrack {
  std::vector<int> labels;
  std::vector<VoteCounts> votes;  // per sample, filled by window inference

  std::size_t size() const { return labels.size(); }
  bool has_votes() const { return !votes.empty(); }
};

// Per-sample argmax labels of one model window.
struct WindowPrediction {
  std::size_t start = 0;
  std::vector<int> labels;
};

// Runs the model over the series windows at `stride` (tail window included,
// see extract_windows).
std::vector<WindowPrediction> predict_windows(const UWashModel& model, const SampleSeries& series, std::size_t stride,
                                              std::size_t batch = 256);

// Every window votes for the samples it covers. A sample's label is the one
// given by the earliest window covering it, so at stride = window length
// each sample takes its single covering window and the tail window only
// fills what the aligned windows missed.
LabelTrack track_from_windows(std::span<const WindowPrediction> windows, std::size_t series_length);

LabelTrack infer_track(const UWashModel& model, const SampleSeries& series, std::size_t stride);

// Mode of each sample's votes; ties go to the smallest label.
LabelTrack multiple_test_voting(const LabelTrack& track);

// Mode over the `window` nearest samples [i - window/2, i - window/2 + window),
// truncated at the series edges; ties go to the smallest label.
LabelTrack mode_filter(const LabelTrack& track, std::size_t window = 128);
std::vector<int> mode_filter(std::span<const int> labels, std::size_t window = 128);

enum class Smoothing { none, mtv, tmf, mtv_tmf };
Smoothing parse_smoothing(const std::string& text);
std::string to_string(Smoothing s);

// Applies MTV before TMF when both are requested. MTV needs vote counts.
LabelTrack smooth(const LabelTrack& track, Smoothing smoothing, std::size_t mode_window = 128);

inline constexpr std::size_t kDefaultGapMerge = 64;

struct ProcedureDetection {
  bool detected = false;
  std::size_t onset_index = 0;  // first non-background sample
  std::size_t offset_index = 0; // one past the last non-background sample
  double onset_s = 0.0;
  double offset_s = 0.0;
};

// Non-background runs separated by fewer than `gap_merge` background samples
// form one procedure; the procedure holding the most non-background samples
// is reported (earliest on ties).
ProcedureDetection detect_procedure(std::span<const int> labels, double rate_hz,
                                    std::size_t gap_merge = kDefaultGapMerge);

struct GestureDurations {
  std::array<std::size_t, 9> counts{};  // G1..G9 samples inside the detected procedure
  std::array<double, 9> seconds{};
  std::size_t background_count = 0;     // every other sample
  double background_seconds = 0.0;
};

GestureDurations gesture_durations(std::span<const int> labels, double rate_hz,
                                   std::size_t gap_merge = kDefaultGapMerge);

struct GestureSegment {
  int label = 0;
  double onset_s = 0.0;
  double offset_s = 0.0;
  double duration_s() const { return offset_s - onset_s; }
};

// Contiguous runs of non-background labels.
std::vector<GestureSegment> gesture_segments(std::span<const int> labels, double rate_hz);

// `index,t,predicted,ground_truth`; ground truth may be empty (written blank).
void write_track_csv(const std::filesystem::path& path, std::span<const int> predicted,
                     std::span<const int> ground_truth, double rate_hz);

struct TrackFile {
  std::vector<int> predicted;
  std::vector<int> ground_truth;  // empty when the column is blank
};
TrackFile read_track_csv(const std::filesystem::path& path);

// Display-only timeline: one colored band per label run.
std::string timeline_svg(std::span<const int> predicted, std::span<const int> ground_truth, double rate_hz);

}  // namespace uwash
