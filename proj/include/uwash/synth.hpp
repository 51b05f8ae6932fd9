#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwash/kv_config.hpp"
#include "uwash/scoring.hpp"
#include "uwash/signal_data.hpp"

namespace uwash {

struct GestureMotif {
  double base_hz = 1.0;
  Vec3 accel_amplitude{};
  Vec3 gyro_amplitude{};
};

std::array<GestureMotif, 9> default_motifs();

// Parameters of the synthetic handwashing corpus. Every field has a
// documented default; see to_kv() for the key names.
struct GenSpec {
  std::uint64_t seed = 0;
  std::size_t participants = 10;
  std::size_t locations = 5;
  std::size_t procedures_per_participant = 5;
  double rate_hz = kDefaultRateHz;
  std::array<GestureMotif, 9> motifs = default_motifs();
  GestureSeconds duration_means = kProfessionalDurations;
  double duration_jitter = 0.2;        // uniform +-fraction of the mean
  double noise_sigma = 0.1;
  double background_min_s = 4.0;       // each leading/trailing background run
  double background_max_s = 10.0;
  double background_step_sigma = 0.05; // damped random walk
  double background_damping = 0.98;
  double participant_amplitude_spread = 0.4;   // per-axis gain in 1 +- spread
  double participant_tempo_spread = 0.12;      // per-gesture frequency factor in 1 +- spread
  double sequence_shuffle_prob = 0.1;  // chance of swapping a gesture with its successor
  double gesture_drop_prob = 0.05;

  void validate() const;
  KeyValueConfig to_kv() const;
  static GenSpec from_kv(const KeyValueConfig& kv);
};

// Deterministic in the spec: participant and procedure streams are seeded
// with derive_seed(seed, {participant}) and derive_seed(seed, {participant,
// procedure}).
std::vector<SampleSeries> generate(const GenSpec& spec);

struct CorpusStats {
  std::size_t series = 0;
  std::size_t samples = 0;
  std::size_t stride1_windows = 0;  // with 64-sample windows
  std::array<std::size_t, kNumClasses> class_counts{};
  double background_fraction = 0.0;
  std::map<std::string, std::size_t> series_per_location;
  std::map<std::string, std::size_t> participants_per_location;
  std::map<std::string, std::size_t> series_per_participant;
  std::vector<std::string> empty_procedures;  // series without any gesture sample

  nlohmann::json to_json() const;
};

CorpusStats describe(const std::vector<SampleSeries>& corpus, std::size_t window_length = kDefaultWindowLength);

}  // namespace uwash
