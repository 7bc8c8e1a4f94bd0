#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hyperppo/checkpoint.hpp"
#include "hyperppo/config.hpp"

namespace hyperppo {

struct ArchIterationStats {
  std::size_t arch_index = 0;
  std::optional<double> mean_return;  // evaluated before the iteration's update
  double policy_loss = 0.0;           // -surrogate, averaged over update steps
  double value_loss = 0.0;
  double std_mean = 0.0;              // after the update
  double rollout_reward = 0.0;        // mean unscaled per-step reward of the rollout
  double approx_kl = 0.0;             // averaged over update steps
  double clip_fraction = 0.0;
};

struct IterationReport {
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;  // cumulative, after this iteration's rollout
  std::vector<ArchIterationStats> archs;  // ordered by arch_index
  double grad_norm = 0.0;                 // last pre-clip global norm
};

struct EvalSummary {
  std::vector<std::size_t> archs;
  std::vector<double> returns;  // mean over episodes, one per arch
  double mean() const;
};

// CSV: iter,env_steps,arch_index,widths,mean_return,policy_loss,value_loss,std_mean
class MetricsWriter {
 public:
  explicit MetricsWriter(std::ostream& out, bool header = true);
  void write(const IterationReport& report);

 private:
  std::ostream& out_;
};

// One HyperPPO (or fixed-architecture PPO) run. Every source of randomness is
// derived from the config seed, so a run is a pure function of its config.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);
  explicit Trainer(const Checkpoint& ckpt);  // resume
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  const TrainConfig& config() const { return config_; }
  bool finished() const { return env_steps_ >= config_.budget; }

  // Sample, generate, roll out, update; one pass of the outer loop.
  IterationReport iterate();

  // Iterates until the env-step budget is spent. On a non-finite loss the
  // current (last good) state is written to `failure_checkpoint` when given,
  // then the error is rethrown.
  void run(MetricsWriter* metrics = nullptr,
           const std::function<void(const IterationReport&)>& on_iteration = {},
           const std::string& failure_checkpoint = {});

  Checkpoint checkpoint() const;

  // Deterministic-mean-action returns under the frozen normalizer, on the
  // run's fixed evaluation seeds.
  EvalSummary evaluate(const std::vector<std::size_t>& archs) const;

  const ActorCritic& model() const { return *model_; }
  const StdStore& stds() const { return stds_; }
  const ObsNormalizer& normalizer() const { return normalizer_; }
  std::uint64_t iteration() const { return iteration_; }
  std::uint64_t env_steps() const { return env_steps_; }
  const std::vector<std::size_t>& last_meta_batch() const { return last_archs_; }
  std::vector<std::uint64_t> eval_seeds() const;

 private:
  std::vector<std::size_t> sample_archs();

  TrainConfig config_;
  std::unique_ptr<ActorCritic> model_;
  AdamState adam_;
  StdStore stds_;
  ObsNormalizer normalizer_;
  std::vector<EnvInstance> envs_;
  ReturnScaler reward_scaler_;
  ArchDistribution dist_;
  Rng rng_;
  std::uint64_t iteration_ = 0;
  std::uint64_t env_steps_ = 0;
  std::vector<std::size_t> last_archs_;
};

}  // namespace hyperppo
