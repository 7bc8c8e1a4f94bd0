#include "hyperppo/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hyperppo {

std::size_t GeneratedWeights::scalar_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ActorCritic::ActorCritic(std::size_t obs_dim, std::size_t act_dim)
    : obs_dim_(obs_dim), act_dim_(act_dim) {
  if (obs_dim == 0 || act_dim == 0) throw std::invalid_argument("obs_dim and act_dim must be >= 1");
}

void ActorCritic::set_params(std::vector<double> values) {
  if (values.size() != layout_.total()) {
    throw std::invalid_argument("parameter vector has " + std::to_string(values.size()) +
                                " entries, layout expects " + std::to_string(layout_.total()));
  }
  params_ = std::move(values);
}

void ActorCritic::add_critic_params() {
  layout_.add("critic.w1_obs", {obs_dim_, kCriticHidden});
  if (conditioning_dim() > 0) layout_.add("critic.w1_cond", {conditioning_dim(), kCriticHidden});
  layout_.add("critic.b1", {1, kCriticHidden});
  layout_.add("critic.w2", {kCriticHidden, kCriticHidden});
  layout_.add("critic.b2", {1, kCriticHidden});
  layout_.add("critic.w3", {kCriticHidden, 1});
  layout_.add("critic.b3", {1, 1});
}

void ActorCritic::init_critic(Rng& rng) {
  const double in = static_cast<double>(obs_dim_ + conditioning_dim());
  init_normal(layout_.at("critic.w1_obs"), params_, 1.0 / std::sqrt(in), rng);
  if (conditioning_dim() > 0) {
    init_normal(layout_.at("critic.w1_cond"), params_, 1.0 / std::sqrt(in), rng);
  }
  init_normal(layout_.at("critic.w2"), params_, 1.0 / std::sqrt(double(kCriticHidden)), rng);
  init_normal(layout_.at("critic.w3"), params_, 1.0 / std::sqrt(double(kCriticHidden)), rng);
}

NodeId ActorCritic::value_graph(ParamScope& scope, NodeId obs, std::optional<NodeId> cond) const {
  Graph& g = scope.graph();
  NodeId h = g.matmul(obs, scope("critic.w1_obs"));
  NodeId bias = scope("critic.b1");
  if (cond) {
    // concat(obs, cond) W1 == obs W1_obs + cond W1_cond, with the conditioning
    // row shared by every sample.
    bias = g.add(bias, g.matmul(*cond, scope("critic.w1_cond")));
  }
  h = g.tanh(g.broadcast_add(h, bias));
  h = g.tanh(g.broadcast_add(g.matmul(h, scope("critic.w2")), scope("critic.b2")));
  return g.broadcast_add(g.matmul(h, scope("critic.w3")), scope("critic.b3"));
}

GeneratedWeights ActorCritic::generate_weights(const ArchSpec& spec) const {
  validate(spec);
  generate_calls_.fetch_add(1);
  Graph graph;
  ParamScope scope(graph, layout_, params_);
  const ArchHeads heads = build_arch(scope, spec, true, false);
  Bindings inputs;
  scope.bind(inputs);
  const Evaluation eval = forward(graph, inputs);

  GeneratedWeights out;
  out.spec = spec;
  out.obs_dim = obs_dim_;
  out.act_dim = act_dim_;
  for (const auto& l : heads.layers) {
    LayerWeights lw{eval.copy(l.weight), eval.copy(l.bias)};
    for (double v : lw.weight.data()) {
      if (!std::isfinite(v)) throw std::runtime_error("generated weights are not finite");
    }
    for (double v : lw.bias.data()) {
      if (!std::isfinite(v)) throw std::runtime_error("generated biases are not finite");
    }
    out.layers.push_back(std::move(lw));
  }
  return out;
}

std::vector<double> ActorCritic::conditioning(const ArchSpec& spec) const {
  if (conditioning_dim() == 0) return {};
  Graph graph;
  ParamScope scope(graph, layout_, params_);
  const ArchHeads heads = build_arch(scope, spec, false, true);
  Bindings inputs;
  scope.bind(inputs);
  const Evaluation eval = forward(graph, inputs);
  const auto v = eval.value(*heads.conditioning);
  return {v.data.begin(), v.data.end()};
}

CriticEvaluator::CriticEvaluator(const ActorCritic& model, std::vector<double> conditioning) {
  ParamScope scope(graph_, model.layout(), model.params());
  obs_ = graph_.input("obs");
  std::optional<NodeId> cond;
  if (!conditioning.empty()) {
    if (conditioning.size() != model.conditioning_dim()) {
      throw std::invalid_argument("conditioning vector has the wrong length");
    }
    const std::size_t dim = conditioning.size();
    cond_ = Tensor({1, dim}, std::move(conditioning));
    cond = graph_.input("cond");
    bindings_[*cond] = cond_.view();
  }
  value_ = model.value_graph(scope, obs_, cond);
  scope.bind(bindings_);
}

std::vector<double> CriticEvaluator::operator()(const TensorView& obs) const {
  Bindings inputs = bindings_;
  inputs[obs_] = obs;
  const Evaluation eval = forward(graph_, inputs);
  const auto v = eval.value(value_);
  return {v.data.begin(), v.data.end()};
}

}  // namespace hyperppo
