#include "hyperppo/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hyperppo {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               bool round_to_float) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch (params " +
                                std::to_string(params.size()) + ", grads " +
                                std::to_string(grads.size()) + ", state " +
                                std::to_string(state.m.size()) + ")");
  }
  // g - g is NaN exactly when g is NaN or infinite; the sum vectorizes.
  double probe = 0.0;
  for (double g : grads) probe += g - g;
  if (probe != 0.0) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (!std::isfinite(grads[i])) {
        throw std::runtime_error("adam_step: non-finite gradient at component " +
                                 std::to_string(i));
      }
    }
  }
  const auto& h = state.hyper;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double step_size = h.learning_rate / (1.0 - std::pow(h.beta1, t));
  const double inv_sqrt_c2 = 1.0 / std::sqrt(1.0 - std::pow(h.beta2, t));
  const double b1 = h.beta1, b2 = h.beta2, eps = h.epsilon;
  double* m = state.m.data();
  double* v = state.v.data();
  double* p = params.data();
  const double* gp = grads.data();
  const std::size_t n = params.size();
  auto update = [&](std::size_t i) {
    const double g = gp[i];
    m[i] = b1 * m[i] + (1.0 - b1) * g;
    v[i] = b2 * v[i] + (1.0 - b2) * g * g;
    p[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
  };
  if (round_to_float) {
    for (std::size_t i = 0; i < n; ++i) {
      update(i);
      m[i] = static_cast<float>(m[i]);
      v[i] = static_cast<float>(v[i]);
      p[i] = static_cast<float>(p[i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) update(i);
  }
}

double clip_global_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (double& g : grads) g *= s;
  }
  return norm;
}

}  // namespace hyperppo
