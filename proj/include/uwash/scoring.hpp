#pragma once

#include <array>
#include <span>

#include <json.hpp>

namespace uwash {

using GestureSeconds = std::array<double, 9>;  // G1..G9

// Per-gesture durations (seconds) from twelve WHO-guideline reference videos.
inline constexpr std::array<std::array<double, 12>, 9> kReferenceVideoDurations = {{
    {3, 4, 4, 4, 5, 6, 4, 5, 3, 9, 7, 7},
    {1.5, 3.5, 3, 4.5, 3, 3.5, 4.5, 3.5, 3.5, 6.5, 4.5, 3},
    {1.5, 3.5, 3, 4.5, 3, 3.5, 4.5, 3.5, 3.5, 6.5, 4.5, 3},
    {4, 4, 3, 5, 6, 5, 6, 6, 11, 10, 5, 2},
    {2, 4, 3, 5, 5.5, 3.5, 5, 3.5, 3.5, 8.5, 4, 3},
    {2, 3, 2, 5.5, 4.5, 2.5, 4, 3.5, 3.5, 4, 5, 2.5},
    {2, 3, 2, 5.5, 4.5, 2.5, 4, 3.5, 3.5, 4, 5, 2.5},
    {3, 3, 2.5, 4.5, 5.5, 3.5, 6.5, 3, 4, 6, 5, 3.5},
    {3, 3, 2.5, 4.5, 5.5, 3.5, 6.5, 3, 4, 6, 5, 3.5},
}};

// Professional duration per gesture: the trimmed average of each row above.
inline constexpr GestureSeconds kProfessionalDurations = {4.9, 3.65, 3.65, 5.4, 4.0, 3.45, 3.45, 4.1, 4.1};

// Drops one occurrence of the maximum and one of the minimum, then averages.
double trimmed_average(std::span<const double> values);

GestureSeconds professional_durations_from_reference();

struct ScoreReport {
  GestureSeconds estimated_duration{};
  std::array<double, 9> gesture_score{};
  double total = 0.0;
};

// Each gesture earns up to 100/9 points, linearly in its duration and
// saturating at the professional duration.
ScoreReport score(const GestureSeconds& estimated, const GestureSeconds& professional = kProfessionalDurations);

// Absolute difference of totals, in points.
double score_error(const ScoreReport& predicted, const ScoreReport& ground_truth);

nlohmann::json to_json(const ScoreReport& report);

}  // namespace uwash
