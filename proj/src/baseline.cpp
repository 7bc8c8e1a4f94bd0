#include "hyperppo/baseline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hyperppo {

namespace {

std::string layer_name(std::size_t l, const char* part) {
  return "policy.l" + std::to_string(l) + "." + part;
}

}  // namespace

DirectPolicy::DirectPolicy(ArchSpec spec, std::size_t obs_dim, std::size_t act_dim,
                           std::uint64_t seed)
    : ActorCritic(obs_dim, act_dim), spec_(std::move(spec)) {
  build_layout();
  Rng rng(seed);
  for (std::size_t l = 0; l <= spec_.depth(); ++l) {
    const auto& w = layout_.at(layer_name(l, "w"));
    init_normal(w, params_, 1.0 / std::sqrt(static_cast<double>(w.shape[0])), rng);
  }
  init_critic(rng);
}

DirectPolicy::DirectPolicy(ArchSpec spec, std::size_t obs_dim, std::size_t act_dim,
                           std::vector<double> params)
    : ActorCritic(obs_dim, act_dim), spec_(std::move(spec)) {
  build_layout();
  set_params(std::move(params));
}

void DirectPolicy::build_layout() {
  validate(spec_);
  std::size_t fan_in = obs_dim_;
  for (std::size_t l = 0; l <= spec_.depth(); ++l) {
    const std::size_t fan_out = l < spec_.depth() ? spec_.widths[l] : act_dim_;
    layout_.add(layer_name(l, "w"), {fan_in, fan_out});
    layout_.add(layer_name(l, "b"), {1, fan_out});
    fan_in = fan_out;
  }
  add_critic_params();
  finalize_layout();
}

std::size_t DirectPolicy::policy_param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l <= spec_.depth(); ++l) {
    n += layout_.at(layer_name(l, "w")).size() + layout_.at(layer_name(l, "b")).size();
  }
  return n;
}

ArchHeads DirectPolicy::build_arch(ParamScope& scope, const ArchSpec& spec, bool weights,
                                   bool /*conditioning*/) const {
  if (!(spec == spec_)) {
    throw std::invalid_argument("baseline policy was trained for " + format_arch(spec_) +
                                ", not " + format_arch(spec));
  }
  ArchHeads heads;
  if (weights) {
    for (std::size_t l = 0; l <= spec_.depth(); ++l) {
      heads.layers.push_back({scope(layer_name(l, "w")), scope(layer_name(l, "b"))});
    }
  }
  return heads;
}

}  // namespace hyperppo
