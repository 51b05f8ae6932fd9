#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uwash/layers.hpp"

namespace uwash::nn {

struct GradCheckOptions {
  double step = 1e-5;           // central-difference half width
  double tolerance = 1e-6;      // max relative error allowed per slot
  double absolute_floor = 1e-9; // pairs with |analytic|, |numeric| both below this count as exact
  // An entry over tolerance whose |analytic - numeric| is still within
  // roundoff_factor * noise / step is counted as roundoff-limited instead of
  // failing. noise is the larger of eps * |loss| and the spread of second
  // differences of the objective sampled noise_probes times at offsets of
  // step / 1000 around the entry. 0 disables.
  double roundoff_factor = 4.0;
  std::size_t noise_probes = 4;
  // A failing entry whose analytic value matches one one-sided difference
  // (within kink_match of the gap between the two sides) sits next to a
  // non-differentiable point (leaky ReLU, max pooling) and is counted as a
  // kink instead of failing.
  bool detect_kinks = true;
  double kink_match = 0.05;
  std::size_t max_entries_per_slot = 0;  // 0 checks every entry; otherwise a seeded sample
  std::uint64_t seed = 1;
};

struct SlotReport {
  std::string name;
  std::size_t checked = 0;
  std::size_t roundoff_limited = 0;
  std::size_t kinks = 0;
  double max_raw_rel_error = 0.0;  // including roundoff-limited entries
  double max_rel_error = 0.0;
  double analytic_at_max = 0.0;
  double numeric_at_max = 0.0;
};

struct GradCheckReport {
  std::vector<SlotReport> slots;
  double tolerance = 0.0;

  double max_rel_error() const;
  bool passed() const { return max_rel_error() < tolerance; }
  std::vector<std::string> failures() const;
};

// Compares analytic gradients against central finite differences.
// `objective` runs a forward pass and returns the scalar loss;
// `analytic` must leave d(objective)/d(slot) in every Param::grad. Frozen
// slots are skipped. To check an input gradient, wrap the input in a Param
// and read it from there inside both callbacks.
GradCheckReport grad_check(const ParamList& params, const std::function<double()>& objective,
                           const std::function<void()>& analytic, const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double absolute_floor);

}  // namespace uwash::nn
