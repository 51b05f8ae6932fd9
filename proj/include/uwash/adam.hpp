#pragma once

#include <cstdint>
#include <vector>

#include "uwash/layers.hpp"

namespace uwash::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment estimates for every trainable slot, in the order of the parameter
// list they were created from.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, const ParamList& params);
};

// One bias-corrected Adam update of every trainable slot from its gradient.
// Frozen slots are skipped. Gradients are left untouched.
void adam_step(const ParamList& params, AdamState& state);

}  // namespace uwash::nn
