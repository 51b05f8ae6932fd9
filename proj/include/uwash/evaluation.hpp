#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwash/pipeline.hpp"
#include "uwash/signal_data.hpp"
#include "uwash/trainer.hpp"
#include "uwash/uwash_net.hpp"

namespace uwash {

// Rows are ground truth, columns are predictions.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  void add(std::span<const int> predicted, std::span<const int> truth);
  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::string to_csv() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;  // no predictions of this class; reported as 0
  bool recall_undefined = false;     // class absent from ground truth; reported as 0
};

struct PrfReport {
  ConfusionMatrix confusion;
  std::array<ClassMetrics, kNumClasses> per_class{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;  // mean of per-class F1
};

PrfReport prf_from_confusion(const ConfusionMatrix& confusion);
PrfReport prf_confusion(std::span<const int> predicted, std::span<const int> truth);

struct TrackPair {
  std::string participant;
  std::span<const int> predicted;
  std::span<const int> truth;
};

// Correct samples over all samples, pooled across participants.
double accuracy_global(std::span<const TrackPair> pairs);
// One participant's accuracy over their own samples.
double accuracy_participant(std::span<const int> predicted, std::span<const int> truth);
// Per participant, pooling every series of that participant.
std::map<std::string, double> accuracy_per_participant(std::span<const TrackPair> pairs);

struct OnsetOffsetError {
  double onset_s = 0.0;
  double offset_s = 0.0;
};
// Empty when either side detected no procedure.
std::optional<OnsetOffsetError> onset_offset_error(const ProcedureDetection& predicted,
                                                   const ProcedureDetection& truth);

// Population statistics (divide by n).
struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};
MeanSd mean_sd(std::span<const double> values);

struct MetricOptions {
  std::size_t gap_merge = kDefaultGapMerge;
};

struct EvaluatedSeries {
  const SampleSeries* series = nullptr;
  std::vector<int> predicted;
};

struct MetricReport {
  double accuracy = 0.0;            // pooled over every test sample
  double confusion_accuracy = 0.0;  // trace / total of the confusion matrix
  PrfReport prf;
  std::map<std::string, double> participant_accuracy;
  double mean_participant_accuracy = 0.0;
  MeanSd onset_error;
  MeanSd offset_error;
  std::size_t detection_failures = 0;
  MeanSd score_error;
  std::size_t samples = 0;

  nlohmann::json to_json() const;
  std::string participant_csv() const;
};

MetricReport compute_metrics(std::span<const EvaluatedSeries> items, const MetricOptions& options = {});

enum class SplitKind { user_dependent, leave_one_participant_out, leave_one_location_out };
SplitKind parse_split_kind(const std::string& text);  // user-dep | lopo | lolo
std::string to_string(SplitKind kind);

struct Fold {
  std::string name;
  std::vector<std::size_t> train;  // indices into the corpus
  std::vector<std::size_t> test;
};

struct SplitPlan {
  SplitKind kind = SplitKind::user_dependent;
  std::vector<Fold> folds;
};

// user-dependent: one fold, each participant's first four procedures train
// and the fifth tests. lopo / lolo: one fold per participant / location.
SplitPlan make_split(std::span<const SampleSeries> corpus, SplitKind kind);
// Throws when any fold shares a series between train and test.
void check_disjoint(const SplitPlan& plan);

inline constexpr std::array<Smoothing, 4> kSmoothingVariants = {Smoothing::none, Smoothing::mtv, Smoothing::tmf,
                                                                Smoothing::mtv_tmf};

// Label tracks of the four variants from one stride-1 pass: the raw track
// uses only the stride-64 windows (and the tail window) of that pass.
std::array<std::vector<int>, 4> variant_tracks(const UWashModel& model, const SampleSeries& series,
                                               std::size_t mode_window = 128);

struct EvalConfig {
  ArchConfig arch;
  TrainConfig train;
  std::size_t train_stride = 1;
  std::size_t mode_window = 128;
  std::size_t gap_merge = kDefaultGapMerge;
};

struct FoldReport {
  std::string name;
  std::size_t train_series = 0;
  std::size_t test_series = 0;
  std::size_t train_windows = 0;
  std::array<MetricReport, 4> variants;
  TrainingLog log;
};

struct EvaluationReport {
  SplitKind kind = SplitKind::user_dependent;
  std::vector<FoldReport> folds;
  std::array<MetricReport, 4> aggregate;  // every fold's test series pooled

  const MetricReport& variant(Smoothing s) const;
  nlohmann::json to_json() const;
};

using ProgressCallback = std::function<void(const std::string&)>;

// Trains one model per fold (or uses `fixed_model` for every fold) and
// scores the four smoothing variants on the test series.
EvaluationReport run_evaluation(std::span<const SampleSeries> corpus, const SplitPlan& plan, const EvalConfig& config,
                                const UWashModel* fixed_model = nullptr, const ProgressCallback& progress = {});

}  // namespace uwash
