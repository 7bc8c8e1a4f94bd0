#pragma once

#include <functional>

#include "hyperppo/graph.hpp"

namespace hyperppo {

// Builds a scalar-valued graph of the probe input node and returns the loss node.
using GraphBuilder = std::function<NodeId(Graph&, NodeId input)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  Tensor analytic;
  Tensor numeric;
};

// Central differences against backward(), component-wise, with denominator
// max(1, |analytic|). Throws if any probed value is non-finite.
GradCheckResult grad_check(const GraphBuilder& f, const Tensor& point, double step);

}  // namespace hyperppo
