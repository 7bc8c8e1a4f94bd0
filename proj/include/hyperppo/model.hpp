#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hyperppo/archspace.hpp"
#include "hyperppo/params.hpp"

namespace hyperppo {

// Concrete weights of one MLP: weight is fan_in x fan_out (y = x W + b).
struct LayerWeights {
  Tensor weight;
  Tensor bias;  // 1 x fan_out
};

struct GeneratedWeights {
  ArchSpec spec;
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<LayerWeights> layers;

  std::size_t scalar_count() const;
};

struct LayerNodes {
  NodeId weight;
  NodeId bias;
};

struct ArchHeads {
  std::vector<LayerNodes> layers;
  std::optional<NodeId> conditioning;  // 1 x conditioning_dim
};

enum class ModelKind : std::uint32_t { kHyper = 1, kBaseline = 2 };

inline constexpr std::size_t kCriticHidden = 128;

// Parameter store plus graph builders shared by the hypernetwork and the
// directly parameterized baseline. The critic is an MLP (2 x 128, tanh) over
// concat(observation, conditioning vector).
class ActorCritic {
 public:
  virtual ~ActorCritic() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t conditioning_dim() const = 0;
  virtual ArchHeads build_arch(ParamScope& scope, const ArchSpec& spec, bool weights,
                               bool conditioning) const = 0;

  std::size_t obs_dim() const { return obs_dim_; }
  std::size_t act_dim() const { return act_dim_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  // Replaces all parameters; the size must match the layout.
  void set_params(std::vector<double> values);

  NodeId value_graph(ParamScope& scope, NodeId obs, std::optional<NodeId> cond) const;

  // One graph forward pass per call; counted for the sweep contract.
  GeneratedWeights generate_weights(const ArchSpec& spec) const;
  std::vector<double> conditioning(const ArchSpec& spec) const;
  std::uint64_t generate_calls() const { return generate_calls_.load(); }

 protected:
  ActorCritic(std::size_t obs_dim, std::size_t act_dim);
  void add_critic_params();
  void init_critic(Rng& rng);
  void finalize_layout() { params_.assign(layout_.total(), 0.0); }

  std::size_t obs_dim_;
  std::size_t act_dim_;
  ParamLayout layout_;
  std::vector<double> params_;

 private:
  mutable std::atomic<std::uint64_t> generate_calls_{0};
};

// Reusable value-function graph for one conditioning vector; rebinds only the
// observation batch on each call.
class CriticEvaluator {
 public:
  CriticEvaluator(const ActorCritic& model, std::vector<double> conditioning);
  CriticEvaluator(const CriticEvaluator&) = delete;
  CriticEvaluator& operator=(const CriticEvaluator&) = delete;

  // obs: B x obs_dim, already normalized. Returns B values.
  std::vector<double> operator()(const TensorView& obs) const;

 private:
  Graph graph_;
  Tensor cond_;
  NodeId obs_ = 0;
  NodeId value_ = 0;
  Bindings bindings_;
};

}  // namespace hyperppo
