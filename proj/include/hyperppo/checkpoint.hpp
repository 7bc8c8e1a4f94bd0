#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperppo/adam.hpp"
#include "hyperppo/config.hpp"
#include "hyperppo/envs.hpp"
#include "hyperppo/model.hpp"
#include "hyperppo/policy.hpp"

namespace hyperppo {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EnvSnapshot {
  std::vector<double> state;
  std::uint64_t steps = 0;
  std::string rng;

  bool operator==(const EnvSnapshot&) const = default;
};

// Everything needed to continue a run exactly where it stopped. Parameters,
// Adam moments and the std table are stored at 32-bit precision (the trainer
// keeps them float-representable); normalizer and env states at 64-bit.
struct Checkpoint {
  TrainConfig config;
  ModelKind kind = ModelKind::kHyper;
  ParamLayout layout;
  std::vector<double> params;
  AdamState adam;
  StdStore stds{StdMode::kCsd, 1, AdamHyper{}};
  std::string trainer_rng;
  double norm_count = 0.0;
  std::vector<double> norm_mean;
  std::vector<double> norm_var;
  std::vector<EnvSnapshot> envs;
  std::vector<double> env_returns;  // reward-scaler accumulators
  double ret_count = 0.0;
  double ret_mean = 0.0;
  double ret_var = 0.0;
  std::uint64_t iteration = 0;
  std::uint64_t env_steps = 0;
};

bool operator==(const Checkpoint& a, const Checkpoint& b);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
// Throws CheckpointError on bad magic, version, truncation or inconsistency.
Checkpoint load_checkpoint(const std::string& path);

// Rebuilds the actor-critic stored in the checkpoint.
std::unique_ptr<ActorCritic> make_model(const Checkpoint& ckpt);
ObsNormalizer make_normalizer(const Checkpoint& ckpt);

}  // namespace hyperppo
