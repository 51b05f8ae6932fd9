#include "uwash/synth.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "uwash/rng.hpp"

namespace uwash {

std::array<GestureMotif, 9> default_motifs() {
  // Base frequencies 1.0 .. 3.4 Hz in 0.3 Hz steps; amplitudes in m/s^2 and rad/s.
  constexpr std::array<Vec3, 9> accel = {{{2.5, 0.6, 1.2},
                                          {0.8, 2.4, 0.5},
                                          {1.5, 1.5, 2.2},
                                          {0.5, 1.0, 2.6},
                                          {2.2, 2.0, 0.4},
                                          {0.7, 0.4, 1.0},
                                          {1.8, 0.9, 0.6},
                                          {1.0, 2.6, 1.6},
                                          {2.6, 1.2, 2.0}}};
  constexpr std::array<Vec3, 9> gyro = {{{0.4, 1.8, 0.6},
                                         {1.6, 0.3, 1.0},
                                         {0.6, 0.6, 1.9},
                                         {1.2, 1.4, 0.3},
                                         {0.3, 0.8, 1.5},
                                         {2.0, 1.0, 1.2},
                                         {1.0, 2.1, 0.5},
                                         {0.5, 0.4, 0.9},
                                         {1.4, 0.7, 0.4}}};
  std::array<GestureMotif, 9> motifs;
  for (std::size_t g = 0; g < 9; ++g) {
    motifs[g] = GestureMotif{1.0 + 0.3 * static_cast<double>(g), accel[g], gyro[g]};
  }
  return motifs;
}

void GenSpec::validate() const {
  const auto fail = [](const std::string& m) { throw ConfigError("generator: " + m); };
  const auto prob = [&](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must be in [0, 1]");
  };
  prob(sequence_shuffle_prob, "sequence_shuffle_prob");
  prob(gesture_drop_prob, "gesture_drop_prob");
  if (!(duration_jitter >= 0.0 && duration_jitter < 1.0)) fail("duration_jitter must be in [0, 1)");
  if (participants == 0 || locations == 0 || procedures_per_participant == 0) {
    fail("participants, locations and procedures_per_participant must be positive");
  }
  if (locations > participants) fail("more locations than participants");
  if (!(rate_hz > 0.0)) fail("rate_hz must be positive");
  if (!(noise_sigma >= 0.0) || !(background_step_sigma >= 0.0)) fail("noise parameters must be non-negative");
  if (!(background_min_s >= 0.0 && background_max_s >= background_min_s)) fail("bad background length range");
  if (!(background_damping >= 0.0 && background_damping <= 1.0)) fail("background_damping must be in [0, 1]");
  if (!(participant_amplitude_spread >= 0.0 && participant_amplitude_spread < 1.0)) {
    fail("participant_amplitude_spread must be in [0, 1)");
  }
  if (!(participant_tempo_spread >= 0.0 && participant_tempo_spread < 1.0)) {
    fail("participant_tempo_spread must be in [0, 1)");
  }
  std::set<double> freqs;
  for (const auto& m : motifs) {
    if (!(m.base_hz > 0.0)) fail("motif frequencies must be positive");
    freqs.insert(m.base_hz);
  }
  if (freqs.size() != motifs.size()) fail("motif base frequencies must be distinct");
  for (double d : duration_means)
    if (!(d > 0.0)) fail("duration means must be positive");
}

namespace {

constexpr const char* kAxisNames[3] = {"x", "y", "z"};

}  // namespace

KeyValueConfig GenSpec::to_kv() const {
  KeyValueConfig kv;
  kv.set("seed", std::to_string(seed));
  kv.set("participants", static_cast<long long>(participants));
  kv.set("locations", static_cast<long long>(locations));
  kv.set("procedures_per_participant", static_cast<long long>(procedures_per_participant));
  kv.set("rate_hz", rate_hz);
  std::vector<double> freqs;
  for (const auto& m : motifs) freqs.push_back(m.base_hz);
  kv.set("motif_base_hz", freqs);
  for (int a = 0; a < 3; ++a) {
    std::vector<double> acc, gyr;
    for (const auto& m : motifs) {
      acc.push_back(m.accel_amplitude[a]);
      gyr.push_back(m.gyro_amplitude[a]);
    }
    kv.set(std::string("motif_accel_amp_") + kAxisNames[a], acc);
    kv.set(std::string("motif_gyro_amp_") + kAxisNames[a], gyr);
  }
  kv.set("duration_means", std::vector<double>(duration_means.begin(), duration_means.end()));
  kv.set("duration_jitter", duration_jitter);
  kv.set("noise_sigma", noise_sigma);
  kv.set("background_min_s", background_min_s);
  kv.set("background_max_s", background_max_s);
  kv.set("background_step_sigma", background_step_sigma);
  kv.set("background_damping", background_damping);
  kv.set("participant_amplitude_spread", participant_amplitude_spread);
  kv.set("participant_tempo_spread", participant_tempo_spread);
  kv.set("sequence_shuffle_prob", sequence_shuffle_prob);
  kv.set("gesture_drop_prob", gesture_drop_prob);
  return kv;
}

GenSpec GenSpec::from_kv(const KeyValueConfig& kv) {
  kv.require_known({"seed", "participants", "locations", "procedures_per_participant", "rate_hz", "motif_base_hz",
                    "motif_accel_amp_x", "motif_accel_amp_y", "motif_accel_amp_z", "motif_gyro_amp_x",
                    "motif_gyro_amp_y", "motif_gyro_amp_z", "duration_means", "duration_jitter", "noise_sigma",
                    "background_min_s", "background_max_s", "background_step_sigma", "background_damping",
                    "participant_amplitude_spread", "participant_tempo_spread", "sequence_shuffle_prob", "gesture_drop_prob"});
  GenSpec s;
  const auto count = [&](const char* key, std::size_t fallback) {
    const long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(std::string("generator: ") + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  if (auto seed = kv.get("seed")) {
    try {
      std::size_t used = 0;
      s.seed = std::stoull(*seed, &used);
      if (used != seed->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("generator: seed '" + *seed + "' is not an unsigned integer");
    }
  }
  s.participants = count("participants", s.participants);
  s.locations = count("locations", s.locations);
  s.procedures_per_participant = count("procedures_per_participant", s.procedures_per_participant);
  s.rate_hz = kv.get_double("rate_hz", s.rate_hz);

  const auto nine = [&](const std::string& key, std::vector<double> fallback) {
    auto v = kv.get_double_list(key, std::move(fallback));
    if (v.size() != 9) throw ConfigError("generator: " + key + " needs 9 values");
    return v;
  };
  std::vector<double> freqs;
  for (const auto& m : s.motifs) freqs.push_back(m.base_hz);
  freqs = nine("motif_base_hz", freqs);
  for (std::size_t g = 0; g < 9; ++g) s.motifs[g].base_hz = freqs[g];
  for (int a = 0; a < 3; ++a) {
    std::vector<double> acc, gyr;
    for (const auto& m : s.motifs) {
      acc.push_back(m.accel_amplitude[a]);
      gyr.push_back(m.gyro_amplitude[a]);
    }
    acc = nine(std::string("motif_accel_amp_") + kAxisNames[a], acc);
    gyr = nine(std::string("motif_gyro_amp_") + kAxisNames[a], gyr);
    for (std::size_t g = 0; g < 9; ++g) {
      s.motifs[g].accel_amplitude[a] = acc[g];
      s.motifs[g].gyro_amplitude[a] = gyr[g];
    }
  }
  const auto means = nine("duration_means", {s.duration_means.begin(), s.duration_means.end()});
  std::copy(means.begin(), means.end(), s.duration_means.begin());
  s.duration_jitter = kv.get_double("duration_jitter", s.duration_jitter);
  s.noise_sigma = kv.get_double("noise_sigma", s.noise_sigma);
  s.background_min_s = kv.get_double("background_min_s", s.background_min_s);
  s.background_max_s = kv.get_double("background_max_s", s.background_max_s);
  s.background_step_sigma = kv.get_double("background_step_sigma", s.background_step_sigma);
  s.background_damping = kv.get_double("background_damping", s.background_damping);
  s.participant_amplitude_spread = kv.get_double("participant_amplitude_spread", s.participant_amplitude_spread);
  s.participant_tempo_spread = kv.get_double("participant_tempo_spread", s.participant_tempo_spread);
  s.sequence_shuffle_prob = kv.get_double("sequence_shuffle_prob", s.sequence_shuffle_prob);
  s.gesture_drop_prob = kv.get_double("gesture_drop_prob", s.gesture_drop_prob);
  s.validate();
  return s;
}

namespace {

constexpr double kGravity = 9.81;

// How one participant performs each gesture: a tempo factor on the motif
// frequency, per-axis gains and the phases of the fundamental and first
// harmonic.
struct ParticipantStyle {
  struct Axis {
    double gain, phase, harmonic_phase;
  };
  std::array<std::array<Axis, 6>, 9> gestures;
  std::array<double, 9> tempo;
};

ParticipantStyle draw_style(const GenSpec& spec, Rng& rng) {
  ParticipantStyle style;
  for (auto& t : style.tempo) t = 1.0 + rng.uniform(-spec.participant_tempo_spread, spec.participant_tempo_spread);
  for (auto& g : style.gestures)
    for (auto& axis : g) {
      axis.gain = 1.0 + rng.uniform(-spec.participant_amplitude_spread, spec.participant_amplitude_spread);
      axis.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      axis.harmonic_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  return style;
}

struct SeriesBuilder {
  std::vector<Vec3> accel, gyro;
  std::vector<int> label;
  Vec3 walk_a{}, walk_g{};

  void background(std::size_t n, const GenSpec& spec, Rng& rng) {
    for (std::size_t i = 0; i < n; ++i) {
      Vec3 a{}, g{};
      for (int k = 0; k < 3; ++k) {
        walk_a[k] = spec.background_damping * walk_a[k] + spec.background_step_sigma * rng.normal();
        walk_g[k] = spec.background_damping * walk_g[k] + spec.background_step_sigma * rng.normal();
        a[k] = walk_a[k] + spec.noise_sigma * rng.normal();
        g[k] = walk_g[k] + spec.noise_sigma * rng.normal();
      }
      a[2] += kGravity;
      accel.push_back(a);
      gyro.push_back(g);
      label.push_back(0);
    }
  }

  void gesture(int g, std::size_t n, const GenSpec& spec, const ParticipantStyle& style, Rng& rng) {
    const auto& motif = spec.motifs[static_cast<std::size_t>(g - 1)];
    const auto& axes = style.gestures[static_cast<std::size_t>(g - 1)];
    const double hz = motif.base_hz * style.tempo[static_cast<std::size_t>(g - 1)];
    const double omega = 2.0 * std::numbers::pi * hz;
    const double t0 = rng.uniform(0.0, 1.0 / hz);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = t0 + static_cast<double>(i) / spec.rate_hz;
      Vec3 a{}, gy{};
      for (int k = 0; k < 3; ++k) {
        const auto& ax = axes[static_cast<std::size_t>(k)];
        const auto& gx = axes[static_cast<std::size_t>(3 + k)];
        a[k] = motif.accel_amplitude[k] * ax.gain *
                   (std::sin(omega * t + ax.phase) + 0.5 * std::sin(2.0 * omega * t + ax.harmonic_phase)) +
               spec.noise_sigma * rng.normal();
        gy[k] = motif.gyro_amplitude[k] * gx.gain *
                    (std::sin(omega * t + gx.phase) + 0.5 * std::sin(2.0 * omega * t + gx.harmonic_phase)) +
                spec.noise_sigma * rng.normal();
      }
      a[2] += kGravity;
      accel.push_back(a);
      gyro.push_back(gy);
      label.push_back(g);
    }
  }
};

std::string padded(std::size_t value, std::size_t width) {
  std::string s = std::to_string(value);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

}  // namespace

std::vector<SampleSeries> generate(const GenSpec& spec) {
  spec.validate();
  std::vector<SampleSeries> corpus;
  const std::size_t width = std::max<std::size_t>(3, std::to_string(spec.participants).size());
  for (std::size_t p = 0; p < spec.participants; ++p) {
    Rng participant_rng(derive_seed(spec.seed, {p}));
    const ParticipantStyle style = draw_style(spec, participant_rng);
    const std::size_t location = p * spec.locations / spec.participants;
    for (std::size_t proc = 0; proc < spec.procedures_per_participant; ++proc) {
      Rng rng(derive_seed(spec.seed, {p, proc + 1}));
      std::array<int, 9> order{1, 2, 3, 4, 5, 6, 7, 8, 9};
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        if (rng.uniform() < spec.sequence_shuffle_prob) {
          std::swap(order[i], order[i + 1]);
          ++i;
        }
      }
      const auto bg_len = [&] {
        return static_cast<std::size_t>(std::lround(rng.uniform(spec.background_min_s, spec.background_max_s) * spec.rate_hz));
      };
      SeriesBuilder b;
      b.background(bg_len(), spec, rng);
      for (int g : order) {
        const bool drop = rng.uniform() < spec.gesture_drop_prob;
        const double factor = 1.0 + rng.uniform(-spec.duration_jitter, spec.duration_jitter);
        if (drop) continue;
        const double seconds = spec.duration_means[static_cast<std::size_t>(g - 1)] * factor;
        const auto n = static_cast<std::size_t>(std::max(1L, std::lround(seconds * spec.rate_hz)));
        b.gesture(g, n, spec, style, rng);
      }
      b.background(bg_len(), spec, rng);

      std::vector<double> t(b.label.size());
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / spec.rate_hz;
      SeriesInfo info{"P" + padded(p + 1, width), "L" + std::to_string(location + 1), static_cast<int>(proc + 1),
                      spec.rate_hz};
      corpus.emplace_back(std::move(info), std::move(t), std::move(b.accel), std::move(b.gyro), std::move(b.label));
    }
  }
  return corpus;
}

CorpusStats describe(const std::vector<SampleSeries>& corpus, std::size_t window_length) {
  if (corpus.empty()) throw Error("synth-gen", "cannot describe an empty corpus");
  CorpusStats s;
  std::map<std::string, std::set<std::string>> participants;
  for (const auto& series : corpus) {
    ++s.series;
    s.samples += series.size();
    if (series.size() >= window_length) s.stride1_windows += series.size() - window_length + 1;
    bool any_gesture = false;
    for (int l : series.label()) {
      ++s.class_counts[static_cast<std::size_t>(l)];
      any_gesture = any_gesture || l != 0;
    }
    if (!any_gesture) s.empty_procedures.push_back(dataset_file_name(series.info()));
    ++s.series_per_location[series.location_id()];
    ++s.series_per_participant[series.participant_id()];
    participants[series.location_id()].insert(series.participant_id());
  }
  for (const auto& [loc, set] : participants) s.participants_per_location[loc] = set.size();
  s.background_fraction = static_cast<double>(s.class_counts[0]) / static_cast<double>(s.samples);
  return s;
}

nlohmann::json CorpusStats::to_json() const {
  return {{"series", series},
          {"samples", samples},
          {"stride1_windows", stride1_windows},
          {"class_counts", class_counts},
          {"background_fraction", background_fraction},
          {"series_per_location", series_per_location},
          {"participants_per_location", participants_per_location},
          {"series_per_participant", series_per_participant},
          {"empty_procedures", empty_procedures}};
}

}  // namespace uwash
