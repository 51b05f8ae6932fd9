#include "uwash/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "uwash/rng.hpp"

namespace uwash::nn {

double relative_error(double analytic, double numeric, double absolute_floor) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < absolute_floor) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& s : slots) worst = std::max(worst, s.max_rel_error);
  return worst;
}

std::vector<std::string> GradCheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& s : slots) {
    if (!(s.max_rel_error < tolerance)) out.push_back(s.name);
  }
  return out;
}

GradCheckReport grad_check(const ParamList& params, const std::function<double()>& objective,
                           const std::function<void()>& analytic, const GradCheckOptions& options) {
  for (Param* p : params) p->grad.fill(0.0);
  analytic();

  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  for (Param* p : params) {
    if (!p->trainable) continue;
    std::vector<std::size_t> indices(p->value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_entries_per_slot != 0 && indices.size() > options.max_entries_per_slot) {
      rng.shuffle(indices.begin(), indices.end());
      indices.resize(options.max_entries_per_slot);
      std::sort(indices.begin(), indices.end());
    }
    SlotReport slot{p->name};
    for (std::size_t i : indices) {
      const double saved = p->value[i];
      p->value[i] = saved + options.step;
      const double up = objective();
      p->value[i] = saved - options.step;
      const double down = objective();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      double err = relative_error(p->grad[i], numeric, options.absolute_floor);
      slot.max_raw_rel_error = std::max(slot.max_raw_rel_error, err);
      const auto roundoff = [&] {
        double noise = std::numeric_limits<double>::epsilon() * std::max(std::abs(up), std::abs(down));
        const double delta = options.step * 1e-3;
        std::vector<double> f;
        for (std::size_t k = 0; k < options.noise_probes + 2; ++k) {
          p->value[i] = saved + delta * (static_cast<double>(k) - 0.5 * static_cast<double>(options.noise_probes + 1));
          f.push_back(objective());
        }
        p->value[i] = saved;
        for (std::size_t k = 1; k + 1 < f.size(); ++k)
          noise = std::max(noise, 0.5 * std::abs(f[k + 1] - 2.0 * f[k] + f[k - 1]));
        return options.roundoff_factor * noise / options.step;
      };
      if (!(err < options.tolerance) && options.roundoff_factor > 0.0 &&
          std::abs(p->grad[i] - numeric) <= roundoff()) {
        err = 0.0;
        ++slot.roundoff_limited;
      } else if (!(err < options.tolerance) && options.detect_kinks) {
        const double center = objective();
        const double right = (up - center) / options.step, left = (center - down) / options.step;
        const double gap = std::abs(right - left);
        const double match = std::min(std::abs(p->grad[i] - right), std::abs(p->grad[i] - left));
        if (gap > 0.0 && match < options.kink_match * gap) {
          err = 0.0;
          ++slot.kinks;
        }
      }
      ++slot.checked;
      if (err > slot.max_rel_error || slot.checked == 1) {
        slot.max_rel_error = std::max(err, slot.max_rel_error);
        slot.analytic_at_max = p->grad[i];
        slot.numeric_at_max = numeric;
      }
    }
    report.slots.push_back(std::move(slot));
  }
  return report;
}

}  // namespace uwash::nn
