#include "uwash/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "uwash/error.hpp"

namespace uwash {

double trimmed_average(std::span<const double> values) {
  if (values.size() < 3) throw Error("scoring", "trimmed average needs at least 3 values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  double sum = 0.0;
  for (auto it = values.begin(); it != values.end(); ++it) {
    if (it != lo && it != hi) sum += *it;
  }
  return sum / static_cast<double>(values.size() - 2);
}

GestureSeconds professional_durations_from_reference() {
  GestureSeconds out{};
  for (std::size_t g = 0; g < 9; ++g) out[g] = trimmed_average(kReferenceVideoDurations[g]);
  return out;
}

ScoreReport score(const GestureSeconds& estimated, const GestureSeconds& professional) {
  ScoreReport r;
  r.estimated_duration = estimated;
  double ratio_sum = 0.0;
  for (std::size_t g = 0; g < 9; ++g) {
    if (!(estimated[g] >= 0.0)) {
      throw Error("scoring", "estimated duration of G" + std::to_string(g + 1) + " is negative or NaN");
    }
    if (!(professional[g] > 0.0)) throw Error("scoring", "professional durations must be positive");
    const double ratio = std::min(1.0, estimated[g] / professional[g]);
    r.gesture_score[g] = (100.0 / 9.0) * ratio;
    ratio_sum += ratio;
  }
  // Summing ratios first makes a fully saturated procedure score exactly 100.
  r.total = (100.0 / 9.0) * ratio_sum;
  return r;
}

double score_error(const ScoreReport& predicted, const ScoreReport& ground_truth) {
  return std::abs(predicted.total - ground_truth.total);
}

nlohmann::json to_json(const ScoreReport& report) {
  return {{"per_gesture_duration", report.estimated_duration},
          {"per_gesture_score", report.gesture_score},
          {"total", report.total}};
}

}  // namespace uwash
