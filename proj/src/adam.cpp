#include "uwash/adam.hpp"

#include <cmath>

#include "uwash/error.hpp"

namespace uwash::nn {

AdamState::AdamState(AdamConfig cfg, const ParamList& params) : config(cfg) {
  for (const Param* p : params) {
    if (!p->trainable) continue;
    first_moment.push_back(Tensor::zeros_like(p->value));
    second_moment.push_back(Tensor::zeros_like(p->value));
  }
}

void adam_step(const ParamList& params, AdamState& state) {
  const auto& cfg = state.config;
  std::size_t slot = 0;
  for (const Param* p : params) {
    if (!p->trainable) continue;
    if (slot >= state.first_moment.size() || !state.first_moment[slot].same_shape(p->value) ||
        !p->grad.same_shape(p->value)) {
      throw ShapeError("adam: optimizer state does not match parameter '" + p->name + "'");
    }
    ++slot;
  }
  if (slot != state.first_moment.size()) throw ShapeError("adam: optimizer state has extra slots");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  slot = 0;
  for (Param* p : params) {
    if (!p->trainable) continue;
    Tensor& m = state.first_moment[slot];
    Tensor& v = state.second_moment[slot];
    ++slot;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      p->value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace uwash::nn
