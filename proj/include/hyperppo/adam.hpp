#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hyperppo {

struct AdamHyper {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamHyper h) : hyper(h), m(size, 0.0), v(size, 0.0) {}
};

// Bias-corrected Adam update, in place. Throws on a non-finite gradient
// before touching params or state. With round_to_float the updated params
// and moments are stored at 32-bit precision.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               bool round_to_float = false);

// Scales grads in place so their joint L2 norm is at most max_norm; returns
// the norm before scaling.
double clip_global_norm(std::span<double> grads, double max_norm);

}  // namespace hyperppo
