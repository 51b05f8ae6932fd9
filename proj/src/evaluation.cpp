#include "uwash/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "uwash/error.hpp"
#include "uwash/rng.hpp"
#include "uwash/scoring.hpp"

namespace uwash {

namespace {

Error eval_error(const std::string& message) { return Error("evaluation", message); }

void check_aligned(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw eval_error("prediction length " + std::to_string(predicted.size()) + " differs from ground truth length " +
                     std::to_string(truth.size()));
  }
}

std::size_t count_correct(std::span<const int> predicted, std::span<const int> truth) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) n += predicted[i] == truth[i] ? 1 : 0;
  return n;
}

nlohmann::json mean_sd_json(const MeanSd& m) { return {{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}}; }

}  // namespace

void ConfusionMatrix::add(std::span<const int> predicted, std::span<const int> truth) {
  check_aligned(predicted, truth);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i], t = truth[i];
    if (p < 0 || p >= kNumClasses || t < 0 || t >= kNumClasses) throw eval_error("label outside 0..9");
    ++counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts)
    for (auto v : row) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

std::string ConfusionMatrix::to_csv() const {
  std::string out = "truth\\predicted";
  for (int c = 0; c < kNumClasses; ++c) out += "," + std::to_string(c);
  out += "\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    out += std::to_string(t);
    for (auto v : counts[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

PrfReport prf_from_confusion(const ConfusionMatrix& confusion) {
  PrfReport r;
  r.confusion = confusion;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::uint64_t tp = confusion.counts[c][c];
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      predicted += confusion.counts[k][c];
      actual += confusion.counts[c][k];
    }
    auto& m = r.per_class[c];
    m.precision_undefined = predicted == 0;
    m.recall_undefined = actual == 0;
    m.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    m.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    r.macro_precision += m.precision;
    r.macro_recall += m.recall;
    r.macro_f1 += m.f1;
  }
  r.macro_precision /= kNumClasses;
  r.macro_recall /= kNumClasses;
  r.macro_f1 /= kNumClasses;
  return r;
}

PrfReport prf_confusion(std::span<const int> predicted, std::span<const int> truth) {
  ConfusionMatrix cm;
  cm.add(predicted, truth);
  return prf_from_confusion(cm);
}

double accuracy_global(std::span<const TrackPair> pairs) {
  std::size_t correct = 0, total = 0;
  for (const auto& p : pairs) {
    check_aligned(p.predicted, p.truth);
    correct += count_correct(p.predicted, p.truth);
    total += p.truth.size();
  }
  if (total == 0) throw eval_error("no samples to score");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double accuracy_participant(std::span<const int> predicted, std::span<const int> truth) {
  check_aligned(predicted, truth);
  if (truth.empty()) throw eval_error("participant has an empty test series");
  return static_cast<double>(count_correct(predicted, truth)) / static_cast<double>(truth.size());
}

std::map<std::string, double> accuracy_per_participant(std::span<const TrackPair> pairs) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;
  for (const auto& p : pairs) {
    check_aligned(p.predicted, p.truth);
    auto& [correct, total] = tally[p.participant];
    correct += count_correct(p.predicted, p.truth);
    total += p.truth.size();
  }
  std::map<std::string, double> out;
  for (const auto& [name, ct] : tally) {
    if (ct.second == 0) throw eval_error("participant " + name + " has an empty test series");
    out[name] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return out;
}

std::optional<OnsetOffsetError> onset_offset_error(const ProcedureDetection& predicted,
                                                   const ProcedureDetection& truth) {
  if (!predicted.detected || !truth.detected) return std::nullopt;
  return OnsetOffsetError{std::abs(predicted.onset_s - truth.onset_s), std::abs(predicted.offset_s - truth.offset_s)};
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd m;
  m.n = values.size();
  if (values.empty()) return m;
  for (double v : values) m.mean += v;
  m.mean /= static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(sq / static_cast<double>(values.size()));
  return m;
}

MetricReport compute_metrics(std::span<const EvaluatedSeries> items, const MetricOptions& options) {
  if (items.empty()) throw eval_error("no evaluated series");
  MetricReport r;
  std::vector<TrackPair> pairs;
  ConfusionMatrix cm;
  std::vector<double> onset, offset, score_err;
  for (const auto& item : items) {
    const auto truth = item.series->label();
    pairs.push_back({item.series->participant_id(), item.predicted, truth});
    cm.add(item.predicted, truth);

    const double rate = item.series->rate_hz();
    const auto pred_proc = detect_procedure(item.predicted, rate, options.gap_merge);
    const auto true_proc = detect_procedure(truth, rate, options.gap_merge);
    if (auto e = onset_offset_error(pred_proc, true_proc)) {
      onset.push_back(e->onset_s);
      offset.push_back(e->offset_s);
    } else {
      ++r.detection_failures;
    }
    const auto pred_score = score(gesture_durations(item.predicted, rate, options.gap_merge).seconds);
    const auto true_score = score(gesture_durations(truth, rate, options.gap_merge).seconds);
    score_err.push_back(score_error(pred_score, true_score));
  }
  r.accuracy = accuracy_global(pairs);
  r.confusion_accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  r.samples = cm.total();
  r.prf = prf_from_confusion(cm);
  r.participant_accuracy = accuracy_per_participant(pairs);
  for (const auto& [name, acc] : r.participant_accuracy) r.mean_participant_accuracy += acc;
  r.mean_participant_accuracy /= static_cast<double>(r.participant_accuracy.size());
  r.onset_error = mean_sd(onset);
  r.offset_error = mean_sd(offset);
  r.score_error = mean_sd(score_err);
  return r;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& m = prf.per_class[c];
    per_class.push_back({{"class", c},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"precision_undefined", m.precision_undefined},
                         {"recall_undefined", m.recall_undefined}});
  }
  return {{"samples", samples},
          {"accuracy", accuracy},
          {"confusion_accuracy", confusion_accuracy},
          {"m_precision", prf.macro_precision},
          {"m_recall", prf.macro_recall},
          {"m_f1", prf.macro_f1},
          {"per_class", per_class},
          {"confusion", prf.confusion.counts},
          {"participant_accuracy", participant_accuracy},
          {"mean_participant_accuracy", mean_participant_accuracy},
          {"onset_error_s", mean_sd_json(onset_error)},
          {"offset_error_s", mean_sd_json(offset_error)},
          {"detection_failures", detection_failures},
          {"score_error_points", mean_sd_json(score_error)},
          {"sd", "population"}};
}

std::string MetricReport::participant_csv() const {
  std::string out = "participant,accuracy\n";
  for (const auto& [name, acc] : participant_accuracy) out += name + "," + format_double(acc) + "\n";
  return out;
}

SplitKind parse_split_kind(const std::string& text) {
  if (text == "user-dep") return SplitKind::user_dependent;
  if (text == "lopo") return SplitKind::leave_one_participant_out;
  if (text == "lolo") return SplitKind::leave_one_location_out;
  throw eval_error("unknown split '" + text + "' (expected user-dep|lopo|lolo)");
}

std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::user_dependent: return "user-dep";
    case SplitKind::leave_one_participant_out: return "lopo";
    case SplitKind::leave_one_location_out: return "lolo";
  }
  return "user-dep";
}

SplitPlan make_split(std::span<const SampleSeries> corpus, SplitKind kind) {
  if (corpus.empty()) throw eval_error("cannot split an empty corpus");
  SplitPlan plan;
  plan.kind = kind;
  std::map<std::string, std::vector<std::size_t>> by_participant, by_location;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    by_participant[corpus[i].participant_id()].push_back(i);
    by_location[corpus[i].location_id()].push_back(i);
  }

  if (kind == SplitKind::user_dependent) {
    Fold fold{"user-dep", {}, {}};
    for (auto& [participant, idx] : by_participant) {
      if (idx.size() != 5) {
        throw eval_error("participant " + participant + " has " + std::to_string(idx.size()) +
                         " procedures; the user-dependent split needs exactly 5");
      }
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return corpus[a].procedure_id() < corpus[b].procedure_id();
      });
      fold.train.insert(fold.train.end(), idx.begin(), idx.begin() + 4);
      fold.test.push_back(idx[4]);
    }
    std::sort(fold.train.begin(), fold.train.end());
    std::sort(fold.test.begin(), fold.test.end());
    plan.folds.push_back(std::move(fold));
  } else {
    const auto& groups = kind == SplitKind::leave_one_participant_out ? by_participant : by_location;
    if (groups.size() < 2) throw eval_error("need at least two groups to hold one out");
    for (const auto& [name, held_out] : groups) {
      Fold fold{name, {}, held_out};
      const std::set<std::size_t> test(held_out.begin(), held_out.end());
      for (std::size_t i = 0; i < corpus.size(); ++i)
        if (!test.count(i)) fold.train.push_back(i);
      plan.folds.push_back(std::move(fold));
    }
  }
  check_disjoint(plan);
  return plan;
}

void check_disjoint(const SplitPlan& plan) {
  for (const auto& fold : plan.folds) {
    const std::set<std::size_t> train(fold.train.begin(), fold.train.end());
    for (auto i : fold.test) {
      if (train.count(i)) throw eval_error("fold " + fold.name + " uses series " + std::to_string(i) + " for both train and test");
    }
  }
}

std::array<std::vector<int>, 4> variant_tracks(const UWashModel& model, const SampleSeries& series,
                                               std::size_t mode_window) {
  const std::size_t len = model.config().input_length;
  const auto dense = predict_windows(model, series, 1);
  // The stride-L pass is a subset of the stride-1 pass.
  std::vector<WindowPrediction> sparse;
  for (const auto& w : extract_windows(series, len, len)) sparse.push_back(dense[w.start_index]);

  const LabelTrack raw = track_from_windows(sparse, series.size());
  const LabelTrack voted = track_from_windows(dense, series.size());
  std::array<std::vector<int>, 4> out;
  out[0] = raw.labels;
  out[1] = multiple_test_voting(voted).labels;
  out[2] = mode_filter(raw.labels, mode_window);
  out[3] = mode_filter(out[1], mode_window);
  return out;
}

const MetricReport& EvaluationReport::variant(Smoothing s) const {
  for (std::size_t i = 0; i < kSmoothingVariants.size(); ++i)
    if (kSmoothingVariants[i] == s) return aggregate[i];
  return aggregate[0];
}

nlohmann::json EvaluationReport::to_json() const {
  auto variants_json = [](const std::array<MetricReport, 4>& v) {
    nlohmann::json j;
    for (std::size_t i = 0; i < kSmoothingVariants.size(); ++i) j[to_string(kSmoothingVariants[i])] = v[i].to_json();
    return j;
  };
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    nlohmann::json log = nlohmann::json::array();
    for (const auto& e : f.log.epochs) log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
    folds_json.push_back({{"name", f.name},
                          {"train_series", f.train_series},
                          {"test_series", f.test_series},
                          {"train_windows", f.train_windows},
                          {"training_log", log},
                          {"stopped_on_plateau", f.log.stopped_on_plateau},
                          {"variants", variants_json(f.variants)}});
  }
  return {{"split", to_string(kind)}, {"folds", folds_json}, {"aggregate", variants_json(aggregate)}};
}

EvaluationReport run_evaluation(std::span<const SampleSeries> corpus, const SplitPlan& plan, const EvalConfig& config,
                                const UWashModel* fixed_model, const ProgressCallback& progress) {
  check_disjoint(plan);
  EvaluationReport report;
  report.kind = plan.kind;
  std::array<std::vector<EvaluatedSeries>, 4> pooled;
  const MetricOptions options{config.gap_merge};

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const Fold& fold = plan.folds[f];
    FoldReport fr;
    fr.name = fold.name;
    fr.train_series = fold.train.size();
    fr.test_series = fold.test.size();

    std::optional<UWashModel> trained;
    const UWashModel* model = fixed_model;
    if (!model) {
      std::vector<Window> windows;
      for (auto i : fold.train) {
        if (corpus[i].size() < config.arch.input_length) continue;
        auto w = extract_windows(corpus[i], config.arch.input_length, config.train_stride);
        windows.insert(windows.end(), w.begin(), w.end());
      }
      fr.train_windows = windows.size();
      TrainConfig tc = config.train;
      tc.seed = derive_seed(config.train.seed, {f, 2});
      trained = UWashModel::build(config.arch, derive_seed(config.train.seed, {f, 1}));
      if (progress) progress("fold " + fold.name + ": training on " + std::to_string(windows.size()) + " windows");
      fr.log = train(*trained, windows, tc, [&](const EpochStats& e) {
        if (progress) {
          progress("fold " + fold.name + " epoch " + std::to_string(e.epoch) + " loss " + format_double(e.loss) +
                   " acc " + format_double(e.accuracy));
        }
      });
      model = &*trained;
    }

    std::array<std::vector<EvaluatedSeries>, 4> fold_items;
    for (auto i : fold.test) {
      auto tracks = variant_tracks(*model, corpus[i], config.mode_window);
      for (std::size_t v = 0; v < 4; ++v) {
        fold_items[v].push_back({&corpus[i], tracks[v]});
        pooled[v].push_back({&corpus[i], std::move(tracks[v])});
      }
    }
    for (std::size_t v = 0; v < 4; ++v) fr.variants[v] = compute_metrics(fold_items[v], options);
    if (progress) {
      progress("fold " + fold.name + ": accuracy raw " + format_double(fr.variants[0].accuracy) + ", mtv+tmf " +
               format_double(fr.variants[3].accuracy));
    }
    report.folds.push_back(std::move(fr));
  }
  for (std::size_t v = 0; v < 4; ++v) report.aggregate[v] = compute_metrics(pooled[v], options);
  return report;
}

}  // namespace uwash
