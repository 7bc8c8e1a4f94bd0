#pragma once

#include <cstdint>
#include <vector>

#include "hyperppo/model.hpp"

namespace hyperppo {

// Fixed-architecture policy whose MLP weights are trained directly
// (policy.l{i}.w / policy.l{i}.b), paired with an unconditioned critic.
class DirectPolicy final : public ActorCritic {
 public:
  DirectPolicy(ArchSpec spec, std::size_t obs_dim, std::size_t act_dim, std::uint64_t seed);
  DirectPolicy(ArchSpec spec, std::size_t obs_dim, std::size_t act_dim,
               std::vector<double> params);

  const ArchSpec& spec() const { return spec_; }
  // Trainable scalars of the policy alone (critic excluded).
  std::size_t policy_param_count() const;

  ModelKind kind() const override { return ModelKind::kBaseline; }
  std::size_t conditioning_dim() const override { return 0; }
  // Throws std::invalid_argument for any spec other than the trained one.
  ArchHeads build_arch(ParamScope& scope, const ArchSpec& spec, bool weights,
                       bool conditioning) const override;

 private:
  void build_layout();

  ArchSpec spec_;
};

}  // namespace hyperppo
