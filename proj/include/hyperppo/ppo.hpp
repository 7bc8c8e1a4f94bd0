#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "hyperppo/envs.hpp"
#include "hyperppo/model.hpp"
#include "hyperppo/policy.hpp"

namespace hyperppo {

struct PpoConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.003;
  std::size_t epochs = 4;
  std::size_t minibatch_size = 256;  // samples per architecture per minibatch
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool scale_rewards = true;  // divide rewards by the running std of discounted returns

  void validate() const;
  AdamHyper adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

// Backward recursion over one env's time series. dones[t] marks the last step
// of an episode; the recursion does not cross it and V(s_{t+1}) is taken as 0
// there (fold any truncation bootstrap into the reward). bootstrap_value is
// V(s_T) for the step after the series.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double bootstrap_value, std::span<const std::uint8_t> dones, double gamma,
                      double lambda);

// Rescales to zero mean and unit (population) standard deviation.
void normalize_advantages(std::span<double> advantages);

double importance_ratio(double logp_new, double logp_old);
std::vector<double> importance_ratio(std::span<const double> logp_new,
                                     std::span<const double> logp_old);
double clipped_surrogate(double ratio, double advantage, double clip);
double value_loss(std::span<const double> predicted, std::span<const double> target);

NodeId clipped_surrogate_graph(Graph& graph, NodeId ratio, NodeId advantage, double clip);
NodeId value_loss_graph(Graph& graph, NodeId predicted, NodeId target);

// Advantages and value targets of one architecture's batch, same [env][t]
// layout as the batch.
struct AdvantageSet {
  std::size_t arch_index = 0;
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

// GAE per env (truncation values folded into rewards as gamma * V(s_final)),
// then per-architecture advantage normalization.
AdvantageSet compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda,
                                bool normalize = true);

// Running std of each env's discounted return, used to rescale rewards
// before GAE. Evaluation returns are never rescaled.
class ReturnScaler {
 public:
  ReturnScaler(std::size_t num_envs, double gamma);

  // Rescales the rewards of one rollout in place (clipped to [-10, 10]),
  // stepping the per-env accumulators in time order across all envs.
  void apply(std::map<std::size_t, TrajectoryBatch>& batches);

  double scale() const;  // current divisor
  const std::vector<double>& returns() const { return returns_; }
  const ObsNormalizer& stats() const { return stats_; }
  void restore(std::vector<double> returns, double count, double mean, double var);

 private:
  double gamma_;
  std::vector<double> returns_;
  ObsNormalizer stats_;
};

struct ArchMinibatch {
  std::size_t arch_index = 0;
  std::vector<std::size_t> sample_arch;  // collection architecture of every row
  Tensor obs;            // B x obs_dim
  Tensor actions;        // B x act_dim
  Tensor old_log_probs;  // B x 1
  Tensor advantages;     // B x 1
  Tensor value_targets;  // B x 1

  std::size_t size() const { return sample_arch.size(); }
};

ArchMinibatch make_minibatch(const TrajectoryBatch& batch, const AdvantageSet& adv,
                             std::span<const std::size_t> rows);

// Raised when a minibatch carries rows from more than one architecture.
class NoMixingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised when the objective evaluates to NaN or infinity.
class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ArchLossTerms {
  std::size_t arch_index = 0;
  double surrogate = 0.0;  // mean clipped surrogate (maximized)
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;      // mean of (r - 1) - log r
  double clip_fraction = 0.0;  // share of rows with |r - 1| > clip
};

struct LossResult {
  double loss = 0.0;
  std::vector<ArchLossTerms> terms;       // ordered by arch_index
  std::vector<double> param_grad;          // flat, model layout; empty without grads
  std::map<std::size_t, std::vector<double>> log_std_grad;
};

// The multi-architecture PPO objective as one graph:
//   loss = mean_i [ -S_i + c_v * V_i - c_e * H_i ]
// where every term of architecture i (ratio, advantage, value) is computed
// with the weights and critic conditioning regenerated for that architecture
// inside the graph, so gradients reach the hypernetwork parameters. The
// model's parameters are bound by view and read at every evaluate() call.
class HyperPpoLoss {
 public:
  HyperPpoLoss(const ActorCritic& model, const StdStore& stds,
               std::vector<ArchMinibatch> batches, const PpoConfig& config);
  HyperPpoLoss(const HyperPpoLoss&) = delete;
  HyperPpoLoss& operator=(const HyperPpoLoss&) = delete;

  LossResult evaluate(bool with_grad) const;

  const Graph& graph() const { return graph_; }
  NodeId loss_node() const { return loss_; }

 private:
  struct ArchNodes {
    std::size_t arch_index;
    NodeId log_std, surrogate, value_loss, entropy, ratio;
  };

  double clip_;

  const ActorCritic& model_;
  std::vector<ArchMinibatch> batches_;
  std::vector<Tensor> log_std_rows_;
  Graph graph_;
  std::unique_ptr<ParamScope> scope_;
  Bindings bindings_;
  std::vector<ArchNodes> nodes_;
  NodeId loss_ = 0;
};

}  // namespace hyperppo
