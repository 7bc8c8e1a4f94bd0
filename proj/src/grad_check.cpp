#include "hyperppo/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hyperppo {

GradCheckResult grad_check(const GraphBuilder& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  Graph graph;
  const NodeId x = graph.input("x");
  const NodeId loss = f(graph, x);

  Tensor probe = point;
  auto value_at = [&]() {
    Evaluation e = forward(graph, {{x, probe.view()}});
    const double v = e.scalar(loss);
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite loss");
    return v;
  };

  Evaluation eval = forward(graph, {{x, probe.view()}});
  Gradients grads = backward(graph, eval, loss);
  GradCheckResult out;
  out.analytic = std::move(grads.at(x));
  out.numeric = Tensor(point.shape());

  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = out.analytic[i];
    if (!std::isfinite(a)) throw std::runtime_error("grad_check: non-finite gradient");
    probe[i] = point[i] + step;
    const double up = value_at();
    probe[i] = point[i] - step;
    const double down = value_at();
    probe[i] = point[i];
    const double num = (up - down) / (2.0 * step);
    out.numeric[i] = num;
    const double rel = std::abs(a - num) / std::max(1.0, std::abs(a));
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_index = i;
    }
  }
  return out;
}

}  // namespace hyperppo
