#include "uwash/commands.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "uwash/checkpoint.hpp"
#include "uwash/error.hpp"
#include "uwash/evaluation.hpp"
#include "uwash/kv_config.hpp"
#include "uwash/pipeline.hpp"
#include "uwash/scoring.hpp"
#include "uwash/signal_data.hpp"
#include "uwash/synth.hpp"
#include "uwash/trainer.hpp"
#include "uwash/uwash_net.hpp"

namespace uwash {

namespace {

namespace fs = std::filesystem;

Error cli_error(const std::string& message) { return Error("cli", message); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot write " + path.string());
  f << text;
  if (!f) throw Error("io", "failed writing " + path.string());
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Values from a `key = value` file fill every option not given on the
// command line. Keys are flag names without the leading dashes.
void apply_config_file(CLI::App* sub, const std::string& path) {
  const auto kv = KeyValueConfig::load(path);
  for (const auto& [key, value] : kv.entries()) {
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (!opt) throw ConfigError("unknown key '" + key + "' in " + path);
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

struct TrainFlags {
  std::string arch;
  std::uint64_t seed = 0;
  std::size_t epochs = 500;
  double lr = 1e-3;
  std::size_t batch = 256;
  std::size_t stride = 1;
  std::size_t plateau_window = 0;
  double plateau_tol = 1e-3;
  CLI::Option* seed_opt = nullptr;

  void add_to(CLI::App* sub) {
    sub->add_option("--arch", arch, "Architecture key-value file (default architecture when omitted)");
    seed_opt = sub->add_option("--seed", seed, "Seed for initialization and shuffling (required)");
    sub->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
    sub->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    sub->add_option("--batch", batch, "Mini-batch size in windows")->check(CLI::PositiveNumber);
    sub->add_option("--stride", stride, "Stride of the training windows")->check(CLI::PositiveNumber);
    sub->add_option("--plateau-window", plateau_window,
                    "Stop when the loss changed by less than --plateau-tol over this many epochs (0 = off)");
    sub->add_option("--plateau-tol", plateau_tol, "Relative loss change treated as a plateau");
  }

  ArchConfig arch_config() const {
    if (arch.empty()) return ArchConfig{};
    return ArchConfig::from_kv(KeyValueConfig::load(arch));
  }

  TrainConfig train_config() const {
    if (!seed_opt || seed_opt->count() == 0) throw cli_error("--seed is required for training");
    TrainConfig tc;
    tc.lr = lr;
    tc.batch = batch;
    tc.epochs = epochs;
    tc.seed = seed;
    tc.plateau_window = plateau_window;
    tc.plateau_tolerance = plateau_tol;
    return tc;
  }
};

SeriesInfo info_from_path(const fs::path& path) {
  try {
    return parse_dataset_file_name(path.filename().string());
  } catch (const Error&) {
    return SeriesInfo{};
  }
}

// ---- synth ----

struct SynthArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
  std::optional<std::size_t> participants, locations, procedures;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  GenSpec spec = a.spec.empty() ? GenSpec{} : GenSpec::from_kv(KeyValueConfig::load(a.spec));
  spec.seed = a.seed;
  if (a.participants) spec.participants = *a.participants;
  if (a.locations) spec.locations = *a.locations;
  if (a.procedures) spec.procedures_per_participant = *a.procedures;
  spec.validate();
  const auto corpus = generate(spec);
  write_dataset(corpus, a.out);
  write_text(fs::path(a.out) / "genspec.cfg", spec.to_kv().serialize());
  const auto stats = describe(corpus);
  write_text(fs::path(a.out) / "stats.json", dump_json(stats.to_json()));
  out << "wrote " << corpus.size() << " series (" << stats.samples << " samples, " << stats.stride1_windows
      << " stride-1 windows) to " << a.out << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data, out, log;
  bool quiet = false;
  TrainFlags flags;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const TrainConfig tc = a.flags.train_config();
  const ArchConfig arch = a.flags.arch_config();
  const auto corpus = load_dataset(a.data);
  const auto windows = make_training_windows(corpus, arch.input_length, a.flags.stride);
  auto model = UWashModel::build(arch, derive_seed(tc.seed, {1}));
  TrainConfig shuffled = tc;
  shuffled.seed = derive_seed(tc.seed, {2});
  if (!a.quiet) out << "training on " << windows.size() << " windows from " << corpus.size() << " series\n";
  const auto log = train(model, windows, shuffled, [&](const EpochStats& e) {
    if (!a.quiet) out << "epoch " << e.epoch << " loss " << format_double(e.loss) << " acc " << format_double(e.accuracy) << "\n";
  });
  const auto info = save_checkpoint(model, a.out);
  write_text(a.log.empty() ? a.out + ".log.csv" : a.log, log.to_csv());
  out << "saved " << a.out << " (" << info.file_bytes << " bytes)\n";
  return 0;
}

// ---- infer ----

struct InferArgs {
  std::string checkpoint, series, out, svg, smooth = "mtv+tmf";
  std::size_t stride = 1, mode_window = 128, batch = 256;
};

LabelTrack run_inference(const UWashModel& model, const SampleSeries& series, Smoothing smoothing, std::size_t stride,
                         std::size_t mode_window) {
  const LabelTrack track = infer_track(model, series, stride);
  return smooth(track, smoothing, mode_window);
}

int cmd_infer(const InferArgs& a, std::ostream& out) {
  const Smoothing smoothing = parse_smoothing(a.smooth);
  const auto model = load_checkpoint(a.checkpoint);
  const auto series = load_csv(a.series, info_from_path(a.series));
  const auto track = run_inference(model, series, smoothing, a.stride, a.mode_window);
  write_track_csv(a.out, track.labels, series.label(), series.rate_hz());
  fs::path svg = a.svg.empty() ? fs::path(a.out).replace_extension(".svg") : fs::path(a.svg);
  write_text(svg, timeline_svg(track.labels, series.label(), series.rate_hz()));
  out << "wrote " << a.out << " and " << svg.string() << "\n";
  return 0;
}

// ---- score ----

struct ScoreArgs {
  std::string track, series, checkpoint, out, column = "predicted", smooth = "mtv+tmf";
  double rate = kDefaultRateHz;
  std::size_t stride = 1, mode_window = 128, gap_merge = kDefaultGapMerge;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  std::vector<int> labels;
  double rate = a.rate;
  if (!a.track.empty()) {
    if (!a.series.empty() || !a.checkpoint.empty()) throw cli_error("give either --track or --series with --checkpoint");
    auto file = read_track_csv(a.track);
    if (a.column == "predicted") {
      labels = std::move(file.predicted);
    } else if (a.column == "ground_truth") {
      if (file.ground_truth.empty()) throw cli_error(a.track + " has no ground_truth column values");
      labels = std::move(file.ground_truth);
    } else {
      throw cli_error("--column must be predicted or ground_truth");
    }
  } else {
    if (a.series.empty() || a.checkpoint.empty()) throw cli_error("give either --track or --series with --checkpoint");
    const auto model = load_checkpoint(a.checkpoint);
    const auto series = load_csv(a.series, info_from_path(a.series));
    rate = series.rate_hz();
    if (a.column == "ground_truth") {
      labels.assign(series.label().begin(), series.label().end());
    } else {
      labels = run_inference(model, series, parse_smoothing(a.smooth), a.stride, a.mode_window).labels;
    }
  }
  const auto durations = gesture_durations(labels, rate, a.gap_merge);
  const auto report = score(durations.seconds);
  const auto proc = detect_procedure(labels, rate, a.gap_merge);
  nlohmann::json j = to_json(report);
  j["procedure"] = {{"detected", proc.detected}, {"onset_s", proc.onset_s}, {"offset_s", proc.offset_s}};
  if (a.out.empty()) {
    out << dump_json(j);
  } else {
    write_text(a.out, dump_json(j));
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string data, checkpoint, out, split = "user-dep", smooth = "mtv+tmf";
  std::size_t mode_window = 128, gap_merge = kDefaultGapMerge;
  bool quiet = false;
  TrainFlags flags;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const SplitKind kind = parse_split_kind(a.split);
  const Smoothing smoothing = parse_smoothing(a.smooth);
  const auto corpus = load_dataset(a.data);
  const auto plan = make_split(corpus, kind);

  EvalConfig config;
  config.mode_window = a.mode_window;
  config.gap_merge = a.gap_merge;
  std::optional<UWashModel> fixed;
  if (!a.checkpoint.empty()) {
    fixed = load_checkpoint(a.checkpoint);
    config.arch = fixed->config();
  } else {
    config.arch = a.flags.arch_config();
    config.train = a.flags.train_config();
    config.train_stride = a.flags.stride;
  }
  ProgressCallback progress;
  if (!a.quiet) progress = [&](const std::string& line) { out << line << "\n"; };
  const auto report = run_evaluation(corpus, plan, config, fixed ? &*fixed : nullptr, progress);

  const MetricReport& chosen = report.variant(smoothing);
  nlohmann::json metrics = chosen.to_json();
  metrics["split"] = to_string(kind);
  metrics["smoothing"] = to_string(smoothing);
  metrics["folds"] = report.folds.size();
  const fs::path dir(a.out);
  write_text(dir / "metrics.json", dump_json(metrics));
  write_text(dir / "evaluation.json", dump_json(report.to_json()));
  write_text(dir / "confusion.csv", chosen.prf.confusion.to_csv());
  write_text(dir / "participants.csv", chosen.participant_csv());
  out << "accuracy (" << to_string(smoothing) << "): " << format_double(chosen.accuracy) << "\n";
  return 0;
}

// ---- inspect ----

struct InspectArgs {
  std::string checkpoint;
  bool json = false;
};

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  CheckpointInfo info;
  const auto model = load_checkpoint(a.checkpoint, &info);
  if (a.json) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& t : info.tensors) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
    out << dump_json({{"architecture", model.config().to_kv().serialize()},
                      {"trainable_parameters", model.parameter_count()},
                      {"stored_values", info.stored_values},
                      {"parameter_bits", info.parameter_bits()},
                      {"parameter_kbit", static_cast<double>(info.parameter_bits()) / 1000.0},
                      {"file_bytes", info.file_bytes},
                      {"file_kbit", static_cast<double>(info.file_bits()) / 1000.0},
                      {"tensors", tensors}});
    return 0;
  }
  out << "architecture:\n" << model.config().to_kv().serialize();
  out << "tensors:\n";
  for (const auto& t : info.tensors) {
    std::string shape;
    for (auto d : t.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    out << "  " << t.name << " [" << shape << "]\n";
  }
  out << "trainable parameters: " << model.parameter_count() << "\n";
  out << "stored values (incl. batch-norm running statistics): " << info.stored_values << "\n";
  out << "parameter size: " << info.parameter_bits() << " bits = "
      << format_double(static_cast<double>(info.parameter_bits()) / 1000.0) << " Kbit (float32)\n";
  out << "file size: " << info.file_bytes << " bytes = " << format_double(static_cast<double>(info.file_bits()) / 1000.0)
      << " Kbit\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sample-wise handwashing gesture segmentation toolkit"};
  app.name("uwash");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::vector<std::pair<CLI::App*, std::string*>> config_files;
  auto add_config = [&](CLI::App* sub, std::string& target) {
    sub->add_option("--config", target, "Key-value file of option values; flags given here take precedence");
    config_files.emplace_back(sub, &target);
  };

  SynthArgs synth;
  std::string synth_config;
  auto* s = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
  s->add_option("--spec", synth.spec, "Generator spec key-value file (defaults when omitted)");
  auto* synth_seed = s->add_option("--seed", synth.seed, "Generator seed (required)");
  s->add_option("--participants", synth.participants, "Override the number of participants");
  s->add_option("--locations", synth.locations, "Override the number of locations");
  s->add_option("--procedures", synth.procedures, "Override procedures per participant");
  s->add_option("--out", synth.out, "Output directory")->required();
  add_config(s, synth_config);

  TrainArgs train_args;
  std::string train_config;
  auto* t = app.add_subcommand("train", "Train a model on a corpus directory");
  t->add_option("--data", train_args.data, "Corpus directory")->required();
  train_args.flags.add_to(t);
  t->add_option("--out", train_args.out, "Checkpoint path")->required();
  t->add_option("--log", train_args.log, "Training log CSV (default <out>.log.csv)");
  t->add_flag("--quiet", train_args.quiet, "Suppress per-epoch output");
  add_config(t, train_config);

  InferArgs infer;
  std::string infer_config;
  auto* i = app.add_subcommand("infer", "Label every sample of one series");
  i->add_option("--checkpoint", infer.checkpoint, "Model checkpoint")->required();
  i->add_option("--series", infer.series, "Series CSV")->required();
  i->add_option("--smooth", infer.smooth, "none|mtv|tmf|mtv+tmf");
  i->add_option("--stride", infer.stride, "Window stride (MTV votes over all windows at this stride)")
      ->check(CLI::PositiveNumber);
  i->add_option("--mode-window", infer.mode_window, "Mode filter width in samples")->check(CLI::PositiveNumber);
  i->add_option("--out", infer.out, "Label-track CSV")->required();
  i->add_option("--svg", infer.svg, "Timeline SVG (default <out> with .svg)");
  add_config(i, infer_config);

  ScoreArgs sc;
  std::string score_config;
  auto* c = app.add_subcommand("score", "Score a handwashing procedure");
  c->add_option("--track", sc.track, "Label-track CSV from infer");
  c->add_option("--series", sc.series, "Series CSV (with --checkpoint)");
  c->add_option("--checkpoint", sc.checkpoint, "Model checkpoint (with --series)");
  c->add_option("--column", sc.column, "Labels to score: predicted|ground_truth");
  c->add_option("--smooth", sc.smooth, "Smoothing when inferring from --series");
  c->add_option("--stride", sc.stride, "Window stride when inferring from --series")->check(CLI::PositiveNumber);
  c->add_option("--mode-window", sc.mode_window, "Mode filter width in samples")->check(CLI::PositiveNumber);
  c->add_option("--rate", sc.rate, "Sample rate of a --track file in Hz")->check(CLI::PositiveNumber);
  c->add_option("--gap-merge", sc.gap_merge, "Background gap (samples) below which activity runs merge");
  c->add_option("--out", sc.out, "Report JSON path (stdout when omitted)");
  add_config(c, score_config);

  EvalArgs ev;
  std::string eval_config;
  auto* e = app.add_subcommand("eval", "Evaluate on a corpus split");
  e->add_option("--data", ev.data, "Corpus directory")->required();
  e->add_option("--split", ev.split, "user-dep|lopo|lolo");
  e->add_option("--checkpoint", ev.checkpoint, "Evaluate this model on every fold instead of training");
  ev.flags.add_to(e);
  e->add_option("--smooth", ev.smooth, "Variant written to metrics.json: none|mtv|tmf|mtv+tmf");
  e->add_option("--mode-window", ev.mode_window, "Mode filter width in samples")->check(CLI::PositiveNumber);
  e->add_option("--gap-merge", ev.gap_merge, "Background gap (samples) below which activity runs merge");
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_flag("--quiet", ev.quiet, "Suppress progress output");
  add_config(e, eval_config);

  InspectArgs ins;
  auto* n = app.add_subcommand("inspect", "Describe a checkpoint");
  n->add_option("--checkpoint", ins.checkpoint, "Model checkpoint")->required();
  n->add_flag("--json", ins.json, "Print JSON");

  try {
    // Required options may come from a config file, so requirements are
    // checked after merging.
    for (auto* sub : {s, t, i, c, e}) {
      for (auto* opt : sub->get_options()) {
        if (opt->get_required()) {
          opt->required(false);
          opt->description(opt->get_description() + " (required)");
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp& h) {
      return app.exit(h, out, err);
    } catch (const CLI::CallForAllHelp& h) {
      return app.exit(h, out, err);
    } catch (const CLI::ParseError& pe) {
      err << "error: cli: " << pe.what() << "\n";
      return 2;
    }
    for (auto& [sub, file] : config_files) {
      if (sub->parsed() && !file->empty()) apply_config_file(sub, *file);
    }
    auto need = [](CLI::App* sub, const char* name) {
      if (sub->get_option(name)->count() == 0) throw cli_error(std::string(name) + " is required");
    };
    if (s->parsed()) {
      need(s, "--out");
      need(s, "--seed");
      (void)synth_seed;
      return cmd_synth(synth, out);
    }
    if (t->parsed()) {
      need(t, "--data");
      need(t, "--out");
      need(t, "--seed");
      return cmd_train(train_args, out);
    }
    if (i->parsed()) {
      need(i, "--checkpoint");
      need(i, "--series");
      need(i, "--out");
      return cmd_infer(infer, out);
    }
    if (c->parsed()) return cmd_score(sc, out);
    if (e->parsed()) {
      need(e, "--data");
      need(e, "--out");
      return cmd_eval(ev, out);
    }
    if (n->parsed()) return cmd_inspect(ins, out);
    throw cli_error("no command given");
  } catch (const Error& ex) {
    err << "error: " << ex.origin() << ": " << ex.what() << "\n";
  } catch (const CLI::Error& ex) {
    err << "error: cli: " << ex.what() << "\n";
  } catch (const fs::filesystem_error& ex) {
    err << "error: io: " << ex.what() << "\n";
  } catch (const std::exception& ex) {
    err << "error: internal: " << ex.what() << "\n";
  }
  return 1;
}

}  // namespace uwash
