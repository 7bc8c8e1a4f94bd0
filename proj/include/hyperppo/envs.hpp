#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hyperppo/model.hpp"
#include "hyperppo/random.hpp"

namespace hyperppo {

enum class EnvKind : std::uint32_t { kPointMass = 0, kPendulum = 1, kQuad2D = 2 };

EnvKind parse_env_kind(std::string_view text);
std::string_view env_name(EnvKind kind);

struct EnvSpec {
  std::size_t obs_dim;
  std::size_t act_dim;
  std::size_t horizon;
  std::size_t state_dim;
};

EnvSpec env_spec(EnvKind kind);

inline constexpr double kDt = 0.05;

struct StepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
};

// Toy continuous-control task with deterministic dynamics. Episodes end only
// at the horizon (time-limit truncation).
class EnvInstance {
 public:
  EnvInstance(EnvKind kind, std::uint64_t seed);

  EnvKind kind() const { return kind_; }
  const EnvSpec& spec() const { return spec_; }

  std::vector<double> reset();  // draws from the instance's own stream
  std::vector<double> reset(Rng& rng);
  // Actions are clipped to [-1, 1]; throws on non-finite input.
  StepResult step(std::span<const double> action);
  std::vector<double> observe() const;

  const std::vector<double>& state() const { return state_; }
  std::size_t step_count() const { return steps_; }
  void set_state(std::vector<double> state, std::size_t steps);
  Rng& rng() { return rng_; }
  const Rng& rng() const { return rng_; }
  void set_rng(Rng rng) { rng_ = std::move(rng); }

 private:
  double advance(std::span<const double> action);

  EnvKind kind_;
  EnvSpec spec_;
  std::vector<double> state_;
  std::size_t steps_ = 0;
  Rng rng_;
};

// Running mean/variance of raw observations, shared by all architectures.
// normalize() clips to [-10, 10].
class ObsNormalizer {
 public:
  explicit ObsNormalizer(std::size_t dim);

  void update(std::span<const double> batch, std::size_t rows);
  std::vector<double> normalize(std::span<const double> obs) const;
  void normalize_into(std::span<const double> obs, std::span<double> out) const;

  std::size_t dim() const { return mean_.size(); }
  double count() const { return count_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& var() const { return var_; }
  std::vector<double> stddev() const;
  void restore(double count, std::vector<double> mean, std::vector<double> var);

 private:
  double count_;
  std::vector<double> mean_;
  std::vector<double> var_;
};

// Per-architecture rollout data, laid out [env][t].
struct TrajectoryBatch {
  std::size_t arch_index = 0;
  std::size_t horizon = 0;  // rollout length T
  std::size_t obs_dim = 0;
  std::size_t act_dim = 0;
  std::vector<std::size_t> env_ids;
  std::vector<double> obs;  // normalized, (envs*T) x obs_dim
  std::vector<double> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> truncation_values;  // V(s_final, g) where done, else 0
  std::vector<double> bootstrap_values;   // V(s_T, g) per env

  std::size_t num_envs() const { return env_ids.size(); }
  std::size_t size() const { return rewards.size(); }
};

struct ActorSnapshot {
  GeneratedWeights weights;
  std::vector<double> std;
  std::shared_ptr<const CriticEvaluator> critic;
};

// Steps every env T times under its assigned architecture's policy.
// assignment[e] is env e's arch_index. The normalizer is updated after every
// step unless `update_normalizer` is false.
std::map<std::size_t, TrajectoryBatch> vec_rollout(
    std::vector<EnvInstance>& envs, const std::vector<std::size_t>& assignment,
    const std::map<std::size_t, ActorSnapshot>& policies, std::size_t horizon,
    ObsNormalizer& normalizer, bool update_normalizer = true);

// Even static partition of N envs over the given architectures, in order.
std::vector<std::size_t> partition_envs(std::size_t num_envs,
                                        const std::vector<std::size_t>& archs);

// Deterministic-mean-action episodes, one per seed, run in lockstep with a
// frozen normalizer. Returns undiscounted episode returns.
std::vector<double> evaluate_policy(EnvKind kind, const GeneratedWeights& weights,
                                    const ObsNormalizer& normalizer,
                                    std::span<const std::uint64_t> episode_seeds);

}  // namespace hyperppo
