#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "hyperppo/archspace.hpp"
#include "hyperppo/envs.hpp"
#include "hyperppo/hypernet.hpp"
#include "hyperppo/policy.hpp"
#include "hyperppo/ppo.hpp"

namespace hyperppo {

enum class TrainMode : std::uint32_t { kHyper = 0, kBaseline = 1 };

TrainMode parse_train_mode(std::string_view text);
std::string_view train_mode_name(TrainMode mode);

struct TrainConfig {
  TrainMode mode = TrainMode::kHyper;
  EnvKind env = EnvKind::kPointMass;
  std::size_t num_envs = 64;        // N
  std::size_t rollout_length = 128;  // T
  std::size_t meta_batch = 8;        // M
  SamplingMode sampling = SamplingMode::kUniform;
  StdMode std_mode = StdMode::kCsd;
  std::uint64_t budget = 200000;  // env steps
  std::size_t eval_every = 1;     // iterations between evaluations, 0 = never
  std::size_t eval_episodes = 8;
  std::uint64_t seed = 0;
  ArchSpec baseline_arch{{256, 256, 256}};
  std::size_t hyper_hidden = 64;
  std::size_t hyper_rounds = 3;
  std::size_t hyper_embedding = 16;
  PpoConfig ppo;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  HyperNetConfig hypernet() const;
  // Architectures updated per iteration: M in hyper mode, 1 in baseline mode.
  std::size_t archs_per_iteration() const;
};

// INI text with sections [run], [env], [ppo]. Missing keys keep their
// defaults; unknown sections or keys are an error.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string config_to_ini(const TrainConfig& config);

}  // namespace hyperppo
