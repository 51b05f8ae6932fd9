// Acceptance suite: one PASS/FAIL line per criterion.
//   uwash_acceptance                 run every criterion
//   uwash_acceptance --criterion 6   run selected ones (repeatable)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "grad_helpers.hpp"
#include "oracles.hpp"
#include "uwash/checkpoint.hpp"
#include "uwash/commands.hpp"
#include "uwash/evaluation.hpp"
#include "uwash/pipeline.hpp"
#include "uwash/scoring.hpp"
#include "uwash/synth.hpp"

using namespace uwash;
using namespace uwash::nn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("uwash_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---------------------------------------------------------------- 1

Outcome gradient_fidelity() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(101);
  GradCheckOptions layer_opts;  // h = 1e-5, tolerance 1e-6, every entry
  std::size_t kinks = 0, roundoff = 0;
  const auto record = [&](const std::string& name, const GradCheckReport& r) {
    for (const auto& s : r.slots) {
      kinks += s.kinks;
      roundoff += s.roundoff_limited;
    }
    o.check(r.passed(), name + " max rel err " + fmt(r.max_rel_error(), 3) + " < 1e-6");
  };
  {
    Conv1d conv(3, 4, 3, 1, 1, rng);
    record("conv1d", gradtest::check_layer(conv, oracle::random_tensor({2, 3, 16}, rng), Mode::train, 1, layer_opts));
  }
  {
    BatchNorm1d bn(4);
    for (auto& g : bn.gamma.value.values()) g = rng.uniform(0.5, 1.5);
    for (auto& b : bn.beta.value.values()) b = rng.uniform(-0.5, 0.5);
    record("batchnorm (train)", gradtest::check_layer(bn, oracle::random_tensor({3, 4, 8}, rng), Mode::train, 2, layer_opts));
    record("batchnorm (eval)", gradtest::check_layer(bn, oracle::random_tensor({3, 4, 8}, rng), Mode::eval, 3, layer_opts));
  }
  {
    LeakyRelu act(0.01);
    record("leaky relu", gradtest::check_layer(act, oracle::random_tensor({2, 4, 16}, rng), Mode::train, 4, layer_opts));
  }
  {
    MaxPool1d pool(2, 2);
    record("maxpool", gradtest::check_layer(pool, oracle::random_tensor({2, 4, 16}, rng), Mode::train, 5, layer_opts));
  }
  {
    Linear fc(8, 4, rng);
    record("linear", gradtest::check_layer(fc, oracle::random_tensor({3, 8}, rng), Mode::train, 6, layer_opts));
  }
  {
    SeBlock se(32, 4, 0.01, rng);
    record("squeeze-excitation", gradtest::check_layer(se, oracle::random_tensor({2, 32, 8}, rng), Mode::train, 7, layer_opts));
  }
  {
    PpmBlock ppm(64, 16, rng);
    record("pyramid pooling", gradtest::check_layer(ppm, oracle::random_tensor({2, 64, 8}, rng), Mode::train, 8, layer_opts));
  }
  {
    // Loss layer on its own.
    Param logits("logits", oracle::random_tensor({2, 10, 6}, rng, 3.0));
    std::vector<int> labels(12);
    for (auto& l : labels) l = static_cast<int>(rng.below(10));
    ParamList params{&logits};
    const auto r = grad_check(
        params, [&] { return softmax_cross_entropy(logits.value, labels).loss; },
        [&] { logits.grad = softmax_cross_entropy(logits.value, labels).grad_logits; }, layer_opts);
    record("softmax cross-entropy", r);
  }
  {
    auto model = UWashModel::build(ArchConfig{}, 11);
    GradCheckOptions full;
    full.tolerance = 1e-4;
    const auto r = gradtest::check_model(model, 2, 12, full);
    std::size_t checked = 0, model_kinks = 0, model_roundoff = 0;
    double raw = 0.0;
    for (const auto& s : r.slots) {
      checked += s.checked;
      model_kinks += s.kinks;
      model_roundoff += s.roundoff_limited;
      raw = std::max(raw, s.max_raw_rel_error);
    }
    kinks += model_kinks;
    roundoff += model_roundoff;
    o.check(r.passed(), "full model (" + std::to_string(checked) + " entries incl. inputs) max rel err " +
                            fmt(r.max_rel_error(), 3) + " < 1e-4");
    for (const auto& f : r.failures()) o.note("  failing slot " + f);
    o.note("full model: " + std::to_string(model_kinks) + " kink crossings, " + std::to_string(model_roundoff) +
           " roundoff-limited entries, raw max rel err " + fmt(raw, 3));
  }
  o.note("total kink crossings " + std::to_string(kinks) + ", roundoff-limited " + std::to_string(roundoff));
  const double elapsed = seconds_since(start);
  o.check(elapsed < 120.0, "runtime " + fmt(elapsed, 3) + " s < 120 s");
  return o;
}

// ---------------------------------------------------------------- 2

Outcome oracle_equivalence() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Rng rng(202);
  const auto max_diff = [](const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  };
  double conv_err = 0.0, max_err = 0.0, avg_err = 0.0, up_err = 0.0;
  const int shapes = 200;
  for (int trial = 0; trial < shapes; ++trial) {
    const std::size_t B = 1 + rng.below(4), Cin = 1 + rng.below(6), Cout = 1 + rng.below(6);
    const std::size_t K = 1 + rng.below(5), stride = 1 + rng.below(3), pad = rng.below(K);
    const std::size_t T = K + rng.below(30);
    const Tensor x = oracle::random_tensor({B, Cin, T}, rng);
    const Tensor w = oracle::random_tensor({Cout, Cin, K}, rng);
    const Tensor b = oracle::random_tensor({Cout}, rng);
    conv_err = std::max(conv_err, max_diff(conv1d_forward(x, w, b, stride, pad), oracle::conv1d(x, w, b, stride, pad)));

    const std::size_t window = 1 + rng.below(8), pstride = 1 + rng.below(window);
    const std::size_t Tp = window + rng.below(40);
    const Tensor xp = oracle::random_tensor({B, Cin, Tp}, rng);
    max_err = std::max(max_err, max_diff(maxpool1d(xp, window, pstride), oracle::maxpool(xp, window, pstride)));
    avg_err = std::max(avg_err, max_diff(avgpool1d(xp, window, pstride), oracle::avgpool(xp, window, pstride)));
    up_err = std::max(up_err, max_diff(upsample1d(xp, window), oracle::upsample(xp, window)));
  }
  const std::string n = std::to_string(shapes) + " random shapes";
  o.check(conv_err <= 1e-12, "conv1d vs loop oracle on " + n + ", max |diff| " + fmt(conv_err, 3));
  o.check(max_err <= 1e-12, "maxpool vs loop oracle on " + n + ", max |diff| " + fmt(max_err, 3));
  o.check(avg_err <= 1e-12, "avgpool vs loop oracle on " + n + ", max |diff| " + fmt(avg_err, 3));
  o.check(up_err <= 1e-12, "upsample vs loop oracle on " + n + ", max |diff| " + fmt(up_err, 3));
  const double elapsed = seconds_since(start);
  o.check(elapsed < 60.0, "runtime " + fmt(elapsed, 3) + " s < 60 s");
  return o;
}

// ---------------------------------------------------------------- 3

Outcome shape_contract() {
  Outcome o;
  const auto model = UWashModel::build(ArchConfig{}, 3);
  Rng rng(303);
  for (std::size_t B : {1u, 5u}) {
    ForwardTrace trace;
    const Tensor y =
        model.predict(oracle::random_tensor({B, 3, 64}, rng), oracle::random_tensor({B, 3, 64}, rng), &trace);
    const std::string b = std::to_string(B);
    o.check(y.shape() == std::vector<std::size_t>{B, 10, 64}, "logits " + y.shape_string() + " == (" + b + ",10,64)");
    o.check(trace.bottleneck.shape() == std::vector<std::size_t>{B, 64, 8},
            "pre-PPM " + trace.bottleneck.shape_string() + " == (" + b + ",64,8)");
    o.check(trace.pyramid.shape() == std::vector<std::size_t>{B, 112, 8},
            "post-PPM " + trace.pyramid.shape_string() + " == (" + b + ",112,8)");
  }
  return o;
}

// ---------------------------------------------------------------- 4

Outcome scoring_exactness() {
  Outcome o;
  const double full = score(kProfessionalDurations).total;
  o.check(std::abs(full - 100.0) < 5e-7, "D^e = D^p gives " + fmt(full, 12) + " (100.000000)");
  const double zero = score(GestureSeconds{}).total;
  o.check(zero == 0.0, "all-zero gives " + fmt(zero));
  auto half = kProfessionalDurations;
  half[0] = 2.45;
  const double h = score(half).total, expected = 100.0 / 9.0 * 8.5;
  o.check(std::abs(h - expected) < 1e-9, "half-G1 gives " + fmt(h, 12) + " vs (100/9)*8.5");
  const double printed[9] = {4.9, 3.65, 3.65, 5.4, 4.0, 3.45, 3.45, 4.1, 4.1};
  const auto avg = professional_durations_from_reference();
  std::string row;
  bool exact = true;
  for (int g = 0; g < 9; ++g) {
    exact = exact && avg[static_cast<std::size_t>(g)] == printed[g];
    row += (g ? ", " : "") + fmt(avg[static_cast<std::size_t>(g)], 17);
  }
  o.check(exact, "trimmed averages of the reference table == printed Avg column: " + row);
  return o;
}

// ---------------------------------------------------------------- 5

Outcome smoothing_correctness() {
  Outcome o;
  Rng rng(505);
  int mtv_mismatch = 0, tmf_mismatch = 0;
  const int tracks = 1500;
  for (int trial = 0; trial < tracks; ++trial) {
    const std::size_t n = 1 + rng.below(120), L = 1 + rng.below(16);
    const int classes = 2 + static_cast<int>(rng.below(9));
    if (L <= n) {
      std::vector<WindowPrediction> windows;
      for (std::size_t s = 0; s + L <= n; ++s) {
        WindowPrediction w{s, std::vector<int>(L)};
        for (auto& l : w.labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
        windows.push_back(std::move(w));
      }
      const auto voted = multiple_test_voting(track_from_windows(windows, n));
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<int> seen;
        for (const auto& w : windows)
          if (w.start <= i && i < w.start + L) seen.push_back(w.labels[i - w.start]);
        if (voted.labels[i] != oracle::mode_of(seen)) {
          ++mtv_mismatch;
          break;
        }
      }
    }
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    const std::size_t window = 1 + rng.below(140);
    if (mode_filter(labels, window) != oracle::mode_filter(labels, window)) ++tmf_mismatch;
  }
  o.check(mtv_mismatch == 0, "MTV == brute-force mode on " + std::to_string(tracks) + " random tracks (" +
                                 std::to_string(mtv_mismatch) + " mismatches)");
  o.check(tmf_mismatch == 0, "mode filter == brute-force windowed mode on " + std::to_string(tracks) +
                                 " random tracks (" + std::to_string(tmf_mismatch) + " mismatches)");

  // Idempotence on tracks whose runs are at least one window long.
  int mtv_idem = 0, tmf_idem = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t window = 2 * (1 + rng.below(64)) + 1;
    std::vector<int> labels;
    for (int r = 0; r < 5; ++r)
      labels.insert(labels.end(), window + rng.below(200), static_cast<int>(rng.below(10)));
    const auto once = mode_filter(labels, window);
    if (mode_filter(once, window) != once) ++tmf_idem;
    // MTV over the stride-1 windows of a track reproduces it, and again on its output.
    std::vector<WindowPrediction> windows;
    for (std::size_t s = 0; s + 64 <= labels.size(); ++s)
      windows.push_back({s, std::vector<int>(labels.begin() + static_cast<long>(s), labels.begin() + static_cast<long>(s + 64))});
    const auto v1 = multiple_test_voting(track_from_windows(windows, labels.size()));
    std::vector<WindowPrediction> again;
    for (std::size_t s = 0; s + 64 <= labels.size(); ++s)
      again.push_back({s, std::vector<int>(v1.labels.begin() + static_cast<long>(s), v1.labels.begin() + static_cast<long>(s + 64))});
    const auto v2 = multiple_test_voting(track_from_windows(again, labels.size()));
    if (v1.labels != labels || v2.labels != v1.labels) ++mtv_idem;
  }
  o.check(tmf_idem == 0, "mode filter idempotent on runs >= window (odd widths, 300 tracks)");
  o.check(mtv_idem == 0, "MTV idempotent on its own output (300 tracks)");

  // Width 128: interior of every run is a fixed point; at a rising edge the
  // tie (64 vs 64) resolves to the smaller label.
  std::vector<int> step(200, 0);
  step.insert(step.end(), 300, 3);
  step.insert(step.end(), 200, 0);
  const auto f1 = mode_filter(step, 128);
  auto expected = step;
  expected[200] = 0;
  o.check(f1 == expected, "width 128: runs >= 128 preserved except the tied first sample of a rising edge");

  LabelTrack tie;
  tie.labels = {0, 0};
  tie.votes.resize(2);
  tie.votes[0][2] = 32;
  tie.votes[0][5] = 32;
  tie.votes[1][3] = 40;
  tie.votes[1][0] = 24;
  const auto t = multiple_test_voting(tie);
  o.check(t.labels == std::vector<int>{2, 3}, "MTV tie {2:32, 5:32} -> 2 and {3:40, 0:24} -> 3");
  o.check(mode_filter(std::vector<int>{7, 4}, 2) == std::vector<int>{7, 4} &&
              mode_filter(std::vector<int>{1, 1, 1, 2, 1, 1}, 3) == std::vector<int>(6, 1),
          "mode filter tie -> smaller label; [1,1,1,2,1,1] w=3 -> all 1");
  return o;
}

// ---------------------------------------------------------------- 6-9

// Pinned end-to-end settings.
constexpr std::uint64_t kCorpusSeed = 2024;
constexpr std::uint64_t kTrainSeed = 7;
constexpr std::size_t kTrainStride = 8;
constexpr std::size_t kEpochCap = 30;

EvalConfig e2e_config() {
  EvalConfig c;
  c.train.lr = 1e-3;
  c.train.batch = 256;
  c.train.epochs = kEpochCap;
  c.train.seed = kTrainSeed;
  c.train.plateau_window = 20;      // < 0.1% loss change over 20 epochs
  c.train.plateau_tolerance = 1e-3;
  c.train_stride = kTrainStride;
  return c;
}

std::string variant_row(const MetricReport& m) {
  return "acc " + fmt(m.accuracy, 5) + ", mean participant acc " + fmt(m.mean_participant_accuracy, 5) +
         ", onset " + fmt(m.onset_error.mean, 3) + " s (sd " + fmt(m.onset_error.sd, 3) + "), offset " +
         fmt(m.offset_error.mean, 3) + " s (sd " + fmt(m.offset_error.sd, 3) + "), score err " +
         fmt(m.score_error.mean, 3) + " (sd " + fmt(m.score_error.sd, 3) + "), detection failures " +
         std::to_string(m.detection_failures) + ", mF1 " + fmt(m.prf.macro_f1, 4);
}

void describe_training(Outcome& o, const EvaluationReport& r) {
  for (const auto& f : r.folds) {
    const auto& e = f.log.epochs;
    o.note("fold " + f.name + ": " + std::to_string(f.train_windows) + " windows, " + std::to_string(e.size()) +
           " epochs, final loss " + (e.empty() ? "-" : fmt(e.back().loss, 4)) +
           (f.log.stopped_on_plateau ? " (plateau)" : " (epoch cap)"));
  }
}

struct EndToEnd {
  std::optional<EvaluationReport> user_dependent, lopo;
  double user_seconds = 0.0, lopo_seconds = 0.0;
};

EndToEnd& e2e(bool need_lopo) {
  static EndToEnd state;
  static std::vector<SampleSeries> corpus;
  if (corpus.empty()) {
    GenSpec spec;
    spec.seed = kCorpusSeed;
    spec.participants = 10;
    spec.locations = 5;
    corpus = generate(spec);
  }
  const auto progress = [](const std::string& line) {
    if (line.find(" epoch ") == std::string::npos) std::cerr << "  " << line << "\n";
  };
  if (!state.user_dependent) {
    const auto start = std::chrono::steady_clock::now();
    state.user_dependent =
        run_evaluation(corpus, make_split(corpus, SplitKind::user_dependent), e2e_config(), nullptr, progress);
    state.user_seconds = seconds_since(start);
  }
  if (need_lopo && !state.lopo) {
    const auto start = std::chrono::steady_clock::now();
    state.lopo = run_evaluation(corpus, make_split(corpus, SplitKind::leave_one_participant_out), e2e_config(),
                                nullptr, progress);
    state.lopo_seconds = seconds_since(start);
  }
  return state;
}

Outcome user_dependent_accuracy() {
  Outcome o;
  auto& s = e2e(false);
  const auto& r = *s.user_dependent;
  const auto& raw = r.variant(Smoothing::none);
  const auto& best = r.variant(Smoothing::mtv_tmf);
  for (auto v : kSmoothingVariants) o.note(to_string(v) + ": " + variant_row(r.variant(v)));
  describe_training(o, r);
  o.check(best.accuracy >= 0.90, "MTV+TMF sample accuracy " + fmt(best.accuracy, 5) + " >= 0.90");
  o.check(best.accuracy >= raw.accuracy,
          "MTV+TMF " + fmt(best.accuracy, 5) + " >= raw stride-64 " + fmt(raw.accuracy, 5));
  o.check(s.user_seconds < 1800.0, "runtime " + fmt(s.user_seconds, 4) + " s < 1800 s");
  return o;
}

Outcome onset_offset() {
  Outcome o;
  const auto& m = e2e(false).user_dependent->variant(Smoothing::mtv_tmf);
  o.check(m.detection_failures == 0, "every test procedure detected (" + std::to_string(m.detection_failures) +
                                         " failures)");
  o.check(m.onset_error.mean < 0.5, "mean onset error " + fmt(m.onset_error.mean, 4) + " s < 0.5 s");
  o.check(m.offset_error.mean < 0.5, "mean offset error " + fmt(m.offset_error.mean, 4) + " s < 0.5 s");
  return o;
}

Outcome score_error_mean() {
  Outcome o;
  const auto& m = e2e(false).user_dependent->variant(Smoothing::mtv_tmf);
  o.check(m.score_error.mean < 5.0,
          "mean score error " + fmt(m.score_error.mean, 4) + " pts (sd " + fmt(m.score_error.sd, 4) + ") < 5");
  return o;
}

Outcome cross_participant() {
  Outcome o;
  auto& s = e2e(true);
  const auto& ud = s.user_dependent->variant(Smoothing::mtv_tmf);
  const auto& lo = s.lopo->variant(Smoothing::mtv_tmf);
  for (auto v : kSmoothingVariants) o.note("lopo " + to_string(v) + ": " + variant_row(s.lopo->variant(v)));
  describe_training(o, *s.lopo);
  o.note("user-dependent mean participant accuracy " + fmt(ud.mean_participant_accuracy, 5) + ", LOPO " +
         fmt(lo.mean_participant_accuracy, 5) + " (LOPO runtime " + fmt(s.lopo_seconds, 4) + " s)");
  o.check(lo.mean_participant_accuracy < ud.mean_participant_accuracy, "LOPO mean accuracy < user-dependent");
  o.check(lo.mean_participant_accuracy >= 0.60, "LOPO mean accuracy " + fmt(lo.mean_participant_accuracy, 5) + " >= 0.60");
  bool trace_ok = true;
  for (const auto* r : {&*s.user_dependent, &*s.lopo}) {
    for (const auto& m : r->aggregate) trace_ok = trace_ok && m.accuracy == m.confusion_accuracy;
    for (const auto& f : r->folds)
      for (const auto& m : f.variants) trace_ok = trace_ok && m.accuracy == m.confusion_accuracy;
  }
  o.check(trace_ok, "accuracy == confusion trace / total in every fold and variant of both runs");
  return o;
}

// ---------------------------------------------------------------- 10

Outcome checkpoint_exactness() {
  Outcome o;
  const fs::path dir = scratch_dir("ckpt");
  // A trained (non-initial) model: a few steps on a small corpus.
  GenSpec spec;
  spec.seed = 10;
  spec.participants = 1;
  spec.locations = 1;
  const auto corpus = generate(spec);
  auto model = UWashModel::build(ArchConfig{}, 10);
  TrainConfig tc;
  tc.epochs = 2;
  tc.seed = 10;
  train(model, make_training_windows(corpus, 64, 16), tc);

  const auto saved = save_checkpoint(model, dir / "a.uwsh");
  const auto loaded = load_checkpoint(dir / "a.uwsh");
  save_checkpoint(loaded, dir / "b.uwsh");
  o.check(slurp(dir / "a.uwsh") == slurp(dir / "b.uwsh"), "save -> load -> save byte-identical");
  bool same_values = true;
  const auto pa = model.params();
  const auto pb = loaded.params();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i]->value.size(); ++k) same_values = same_values && pa[i]->value[k] == pb[i]->value[k];
  o.check(same_values, "every stored value identical after load");
  const auto before = infer_track(model, corpus[0], 1), after = infer_track(loaded, corpus[0], 1);
  bool same_logits = true;
  {
    Rng rng(1010);
    const Tensor a = oracle::random_tensor({8, 3, 64}, rng), g = oracle::random_tensor({8, 3, 64}, rng);
    const Tensor y0 = model.predict(a, g), y1 = loaded.predict(a, g);
    for (std::size_t i = 0; i < y0.size(); ++i) same_logits = same_logits && y0[i] == y1[i];
  }
  o.check(same_logits && before.labels == after.labels && before.votes == after.votes,
          "logits, labels and votes identical before save and after load");

  std::ostringstream out, err;
  const int code = run_cli({"inspect", "--checkpoint", (dir / "a.uwsh").string(), "--json"}, out, err);
  o.check(code == 0, "inspect exits 0");
  if (code == 0) {
    const auto j = nlohmann::json::parse(out.str());
    const std::size_t analytic_bits = 32 * model.stored_value_count();
    o.check(j["parameter_bits"].get<std::size_t>() == analytic_bits,
            "inspect parameter bits " + std::to_string(j["parameter_bits"].get<std::size_t>()) + " == 32 x " +
                std::to_string(model.stored_value_count()) + " stored values");
    o.check(j["file_bytes"].get<std::size_t>() * 8 == analytic_bits + saved.header_bits(),
            "inspect file size == parameter bits + " + std::to_string(saved.header_bits()) + " header bits");
    o.note("default model: " + std::to_string(model.parameter_count()) + " trainable parameters, " +
           std::to_string(model.stored_value_count()) + " stored values, " + fmt(analytic_bits / 1000.0, 7) +
           " Kbit parameters, " + fmt(saved.file_bits() / 1000.0, 7) + " Kbit file (reference figure 496 Kbit)");
    const std::string readme = slurp(fs::path(UWASH_SOURCE_DIR) / "README.md");
    const std::string kbit = fmt(analytic_bits / 1000.0, 7);
    o.check(readme.find("496") != std::string::npos && readme.find(kbit) != std::string::npos,
            "README documents " + kbit + " Kbit against 496 Kbit");
  }
  fs::remove_all(dir);
  return o;
}

// ---------------------------------------------------------------- 11

Outcome metric_kernels() {
  Outcome o;
  // Eq. 3 / Eq. 4: three participants, 10 samples each, 10 + 8 + 7 correct.
  const std::vector<int> truth = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> p1 = truth, p2 = truth;
  p1[0] = 5;
  p1[1] = 5;
  p2[2] = 0;
  p2[3] = 0;
  p2[9] = 0;
  const std::vector<TrackPair> pairs = {{"A", truth, truth}, {"B", p1, truth}, {"C", p2, truth}};
  o.check(accuracy_global(pairs) == 25.0 / 30.0, "global accuracy 25/30");
  const auto per = accuracy_per_participant(pairs);
  o.check(per.at("A") == 1.0 && per.at("B") == 0.8 && per.at("C") == 0.7, "per-participant accuracy 1.0 / 0.8 / 0.7");
  o.check(accuracy_participant(std::vector<int>(10, 0), std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}) == 0.5,
          "half correct -> 0.5");

  // Eq. 5.
  const auto e = onset_offset_error(ProcedureDetection{true, 105, 600, 2.10, 12.0},
                                    ProcedureDetection{true, 100, 590, 2.00, 11.8});
  o.check(e && std::abs(e->onset_s - 0.10) < 1e-12 && std::abs(e->offset_s - 0.20) < 1e-12,
          "onset / offset errors 0.10 s / 0.20 s");
  o.check(!onset_offset_error(ProcedureDetection{}, ProcedureDetection{true, 0, 1, 0.0, 0.02}),
          "undetected side -> no error value");

  // Confusion matrix and P/R/F1 on a hand-worked fixture:
  //   truth 0 0 1 1 1 2 | pred 0 1 1 1 2 2
  const std::vector<int> t = {0, 0, 1, 1, 1, 2}, p = {0, 1, 1, 1, 2, 2};
  const auto r = prf_confusion(p, t);
  const auto& c = r.confusion.counts;
  o.check(c[0][0] == 1 && c[0][1] == 1 && c[1][1] == 2 && c[1][2] == 1 && c[2][2] == 1 && r.confusion.total() == 6,
          "confusion counts (rows truth, cols prediction)");
  const auto& m0 = r.per_class[0];
  const auto& m1 = r.per_class[1];
  const auto& m2 = r.per_class[2];
  o.check(m0.precision == 1.0 && m0.recall == 0.5 && m0.f1 == 2.0 / 3.0, "class 0: P 1, R 1/2, F1 2/3");
  o.check(m1.precision == 2.0 / 3.0 && m1.recall == 2.0 / 3.0 && std::abs(m1.f1 - 2.0 / 3.0) < 1e-15,
          "class 1: P 2/3, R 2/3, F1 2/3");
  o.check(m2.precision == 0.5 && m2.recall == 1.0 && std::abs(m2.f1 - 2.0 / 3.0) < 1e-15,
          "class 2: P 1/2, R 1, F1 2/3");
  o.check(r.per_class[5].precision_undefined && r.per_class[5].recall_undefined && r.per_class[5].f1 == 0.0,
          "absent class flagged and reported as 0");
  const double mp = (1.0 + 2.0 / 3.0 + 0.5) / 10.0, mr = (0.5 + 2.0 / 3.0 + 1.0) / 10.0;
  o.check(std::abs(r.macro_precision - mp) < 1e-15 && std::abs(r.macro_recall - mr) < 1e-15 &&
              std::abs(r.macro_f1 - 0.2) < 1e-15,
          "macro P / R / F1 = " + fmt(mp) + " / " + fmt(mr) + " / 0.2 (mean over 10 classes)");
  std::vector<int> balanced;
  for (int k = 0; k < 10; ++k) balanced.insert(balanced.end(), 5, k);
  const auto zeros = prf_confusion(std::vector<int>(balanced.size(), 0), balanced);
  o.check(zeros.per_class[0].recall == 1.0 && zeros.per_class[0].precision == 0.1,
          "always-0 predictor on balanced data: recall_0 1, precision_0 0.1");

  // Eq. 3 == trace / total on every evaluation run.
  GenSpec spec;
  spec.seed = 11;
  spec.participants = 3;
  spec.locations = 3;
  const auto corpus = generate(spec);
  const auto model = UWashModel::build(ArchConfig{}, 11);
  bool trace_ok = true;
  for (auto kind : {SplitKind::user_dependent, SplitKind::leave_one_participant_out, SplitKind::leave_one_location_out}) {
    const auto report = run_evaluation(corpus, make_split(corpus, kind), EvalConfig{}, &model);
    for (const auto& m : report.aggregate) trace_ok = trace_ok && m.accuracy == m.confusion_accuracy;
    for (const auto& f : report.folds)
      for (const auto& m : f.variants) trace_ok = trace_ok && m.accuracy == m.confusion_accuracy;
  }
  o.check(trace_ok, "accuracy == confusion trace / total for every fold and variant of user-dep, LOPO and LOLO runs");
  return o;
}

// ---------------------------------------------------------------- 12

Outcome determinism() {
  Outcome o;
  const fs::path dir = scratch_dir("determinism");
  const auto run = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
  };
  const auto files_equal = [](const fs::path& a, const fs::path& b, std::size_t& count) {
    bool same = true;
    count = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      same = same && fs::exists(b / e.path().filename()) && slurp(e.path()) == slurp(b / e.path().filename());
      ++count;
    }
    for (const auto& e : fs::directory_iterator(b)) same = same && fs::exists(a / e.path().filename());
    return same;
  };
  for (const char* name : {"c1", "c2"}) {
    run({"synth", "--seed", "12", "--participants", "3", "--locations", "3", "--out", (dir / name).string()});
  }
  std::size_t n = 0;
  const bool corpus_same = files_equal(dir / "c1", dir / "c2", n);
  o.check(corpus_same && n > 0, "two synth runs: " + std::to_string(n) + " files byte-identical");
  for (const char* name : {"m1", "m2"}) {
    fs::create_directories(dir / name);
    run({"train", "--data", (dir / "c1").string(), "--seed", "13", "--epochs", "3", "--stride", "16", "--quiet",
         "--out", (dir / name / "model.uwsh").string()});
  }
  const bool model_same = files_equal(dir / "m1", dir / "m2", n);
  o.check(model_same && n > 0,
          "two train runs: checkpoint and training log byte-identical (" + std::to_string(n) + " files)");
  fs::remove_all(dir);
  return o;
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "Criterion number(s) to run (default: all)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "gradient fidelity", gradient_fidelity},
      {2, "oracle equivalence", oracle_equivalence},
      {3, "shape contract", shape_contract},
      {4, "scoring exactness", scoring_exactness},
      {5, "smoothing correctness", smoothing_correctness},
      {6, "synthetic user-dependent accuracy", user_dependent_accuracy},
      {7, "synthetic onset/offset error", onset_offset},
      {8, "synthetic score error", score_error_mean},
      {9, "cross-participant degradation", cross_participant},
      {10, "checkpoint exactness and size", checkpoint_exactness},
      {11, "metric kernels", metric_kernels},
      {12, "determinism", determinism},
  };
  const std::set<int> want(selected.begin(), selected.end());
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!want.empty() && !want.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.title << " ("
              << fmt(seconds_since(start), 4) << " s)\n"
              << std::flush;
    all_pass = all_pass && o.pass;
  }
  return all_pass ? 0 : 1;
}
