#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hyperppo/model.hpp"

namespace hyperppo {

// Node features: one-hot width symbol (7), depth position in [0,1], input
// flag, output flag. Input/output nodes carry an all-zero width one-hot.
inline constexpr std::size_t kNodeFeatures = kWidthAlphabet.size() + 3;
// Side of the square weight slab every layer is sliced from.
inline constexpr std::size_t kSlabSize = 256;

struct ArchGraph {
  Tensor features;  // (depth + 2) x kNodeFeatures
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // i -> i+1

  std::size_t node_count() const { return features.rows(); }
};

ArchGraph encode_arch(const ArchSpec& spec, std::size_t obs_dim, std::size_t act_dim);

struct HyperNetConfig {
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::size_t hidden = 64;     // node state size
  std::size_t rounds = 3;      // gated message-passing rounds
  std::size_t embedding = 16;  // architecture embedding for the critic
};

// Graph hypernetwork: encodes the layer chain, runs gated message passing in
// both directions, and decodes every edge into a top-left slice of a shared
// 256x256 weight slab (plus a 256 bias row). Decoded layers are normalized to
// unit RMS, multiplied by a learned gain and scaled by 1/sqrt(fan_in). A
// mean-pooled projection of the node states is the architecture embedding
// that conditions the critic.
class HyperNet final : public ActorCritic {
 public:
  HyperNet(const HyperNetConfig& config, std::uint64_t seed);
  // Same layout, parameters supplied (checkpoint load).
  HyperNet(const HyperNetConfig& config, std::vector<double> params);

  const HyperNetConfig& config() const { return config_; }

  ModelKind kind() const override { return ModelKind::kHyper; }
  std::size_t conditioning_dim() const override { return config_.embedding; }
  ArchHeads build_arch(ParamScope& scope, const ArchSpec& spec, bool weights,
                       bool conditioning) const override;

  std::vector<double> arch_embedding(const ArchSpec& spec) const { return conditioning(spec); }

 private:
  void build_layout();

  HyperNetConfig config_;
};

}  // namespace hyperppo
