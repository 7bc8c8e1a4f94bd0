#include "hyperppo/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hyperppo/policy.hpp"

namespace hyperppo {

namespace {

constexpr double kPi = std::numbers::pi;

// PointMass
constexpr double kPmPosBound = 5.0;
constexpr double kPmVelBound = 5.0;
// Pendulum
constexpr double kPendGravity = 10.0;
constexpr double kPendMaxSpeed = 8.0;
constexpr double kPendMaxTorque = 2.0;
// Quad2D
constexpr double kQuadMass = 0.5;
constexpr double kQuadGravity = 9.81;
constexpr double kQuadInertia = 0.01;
constexpr double kQuadArm = 0.1;
constexpr double kQuadMaxThrust = 4.0;
constexpr double kQuadPosBound = 5.0;
constexpr double kQuadVelBound = 10.0;
constexpr double kQuadRateBound = 10.0;
constexpr double kQuadTargetZ = 1.0;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

}  // namespace

EnvKind parse_env_kind(std::string_view text) {
  if (text == "pointmass") return EnvKind::kPointMass;
  if (text == "pendulum") return EnvKind::kPendulum;
  if (text == "quad2d") return EnvKind::kQuad2D;
  throw std::invalid_argument("unknown env '" + std::string(text) +
                              "' (expected pointmass | pendulum | quad2d)");
}

std::string_view env_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::kPointMass: return "pointmass";
    case EnvKind::kPendulum: return "pendulum";
    case EnvKind::kQuad2D: return "quad2d";
  }
  return "?";
}

EnvSpec env_spec(EnvKind kind) {
  switch (kind) {
    case EnvKind::kPointMass: return {6, 2, 200, 6};
    case EnvKind::kPendulum: return {3, 1, 200, 2};
    case EnvKind::kQuad2D: return {6, 2, 400, 6};
  }
  throw std::invalid_argument("bad env kind");
}

EnvInstance::EnvInstance(EnvKind kind, std::uint64_t seed)
    : kind_(kind), spec_(env_spec(kind)), state_(spec_.state_dim, 0.0), rng_(seed) {
  reset();
}

std::vector<double> EnvInstance::reset() { return reset(rng_); }

std::vector<double> EnvInstance::reset(Rng& rng) {
  steps_ = 0;
  switch (kind_) {
    case EnvKind::kPointMass:
      // pos, vel, goal
      for (double& s : state_) s = uniform(rng, -1.0, 1.0);
      break;
    case EnvKind::kPendulum:
      state_[0] = uniform(rng, -kPi, kPi);
      state_[1] = uniform(rng, -1.0, 1.0);
      break;
    case EnvKind::kQuad2D:
      for (double& s : state_) s = uniform(rng, -0.3, 0.3);
      state_[1] += kQuadTargetZ;
      break;
  }
  return observe();
}

std::vector<double> EnvInstance::observe() const {
  const auto& s = state_;
  switch (kind_) {
    case EnvKind::kPointMass:
      return {s[0], s[1], s[2], s[3], s[4] - s[0], s[5] - s[1]};
    case EnvKind::kPendulum:
      return {std::cos(s[0]), std::sin(s[0]), s[1]};
    case EnvKind::kQuad2D:
      return s;
  }
  return {};
}

void EnvInstance::set_state(std::vector<double> state, std::size_t steps) {
  if (state.size() != spec_.state_dim) throw std::invalid_argument("env state has the wrong size");
  if (steps > spec_.horizon) throw std::invalid_argument("env step counter exceeds horizon");
  state_ = std::move(state);
  steps_ = steps;
}

double EnvInstance::advance(std::span<const double> action) {
  auto& s = state_;
  switch (kind_) {
    case EnvKind::kPointMass: {
      for (int k = 0; k < 2; ++k) {
        s[2 + k] = std::clamp(s[2 + k] + action[k] * kDt, -kPmVelBound, kPmVelBound);
        s[k] = std::clamp(s[k] + s[2 + k] * kDt, -kPmPosBound, kPmPosBound);
      }
      const double dist = std::hypot(s[0] - s[4], s[1] - s[5]);
      return -dist - 0.01 * (action[0] * action[0] + action[1] * action[1]);
    }
    case EnvKind::kPendulum: {
      const double torque = kPendMaxTorque * action[0];
      const double accel = 1.5 * kPendGravity * std::sin(s[0]) + 3.0 * torque;
      s[1] = std::clamp(s[1] + accel * kDt, -kPendMaxSpeed, kPendMaxSpeed);
      s[0] = wrap_angle(s[0] + s[1] * kDt);
      return -(s[0] * s[0] + 0.1 * s[1] * s[1] + 0.001 * torque * torque);
    }
    case EnvKind::kQuad2D: {
      const double f1 = kQuadMaxThrust * (action[0] + 1.0) / 2.0;
      const double f2 = kQuadMaxThrust * (action[1] + 1.0) / 2.0;
      const double thrust = f1 + f2;
      const double ax = -thrust * std::sin(s[2]) / kQuadMass;
      const double az = thrust * std::cos(s[2]) / kQuadMass - kQuadGravity;
      const double alpha = (f2 - f1) * kQuadArm / kQuadInertia;
      s[3] = std::clamp(s[3] + ax * kDt, -kQuadVelBound, kQuadVelBound);
      s[4] = std::clamp(s[4] + az * kDt, -kQuadVelBound, kQuadVelBound);
      s[5] = std::clamp(s[5] + alpha * kDt, -kQuadRateBound, kQuadRateBound);
      s[0] = std::clamp(s[0] + s[3] * kDt, -kQuadPosBound, kQuadPosBound);
      s[1] = std::clamp(s[1] + s[4] * kDt, -kQuadPosBound, kQuadPosBound);
      s[2] = wrap_angle(s[2] + s[5] * kDt);
      return -std::hypot(s[0], s[1] - kQuadTargetZ) - 0.1 * std::abs(s[2]) -
             0.05 * std::hypot(s[3], s[4]);
    }
  }
  return 0.0;
}

StepResult EnvInstance::step(std::span<const double> action) {
  if (action.size() != spec_.act_dim) {
    throw std::invalid_argument("action has length " + std::to_string(action.size()) +
                                ", env expects " + std::to_string(spec_.act_dim));
  }
  if (steps_ >= spec_.horizon) throw std::logic_error("step past the horizon; reset first");
  double clipped[2] = {0.0, 0.0};
  for (std::size_t j = 0; j < action.size(); ++j) {
    if (!std::isfinite(action[j])) throw std::invalid_argument("non-finite action");
    clipped[j] = std::clamp(action[j], -1.0, 1.0);
  }
  StepResult out;
  out.reward = advance(std::span<const double>(clipped, action.size()));
  ++steps_;
  out.done = steps_ == spec_.horizon;
  out.obs = observe();
  return out;
}

// ---------------------------------------------------------------------------

ObsNormalizer::ObsNormalizer(std::size_t dim) : count_(1e-4), mean_(dim, 0.0), var_(dim, 1.0) {}

void ObsNormalizer::update(std::span<const double> batch, std::size_t rows) {
  const std::size_t d = dim();
  if (batch.size() != rows * d) throw std::invalid_argument("normalizer batch has the wrong size");
  if (rows == 0) return;
  std::vector<double> bmean(d, 0.0), bvar(d, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) bmean[j] += batch[r * d + j];
  }
  for (double& m : bmean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double e = batch[r * d + j] - bmean[j];
      bvar[j] += e * e;
    }
  }
  for (double& v : bvar) v /= static_cast<double>(rows);
  const double n = static_cast<double>(rows);
  const double total = count_ + n;
  for (std::size_t j = 0; j < d; ++j) {
    const double delta = bmean[j] - mean_[j];
    const double m2 = var_[j] * count_ + bvar[j] * n + delta * delta * count_ * n / total;
    mean_[j] += delta * n / total;
    var_[j] = m2 / total;
  }
  count_ = total;
}

void ObsNormalizer::normalize_into(std::span<const double> obs, std::span<double> out) const {
  const std::size_t d = dim();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t j = i % d;
    out[i] = std::clamp((obs[i] - mean_[j]) / std::sqrt(var_[j] + 1e-8), -10.0, 10.0);
  }
}

std::vector<double> ObsNormalizer::normalize(std::span<const double> obs) const {
  if (obs.size() % dim() != 0) throw std::invalid_argument("observation has the wrong size");
  std::vector<double> out(obs.size());
  normalize_into(obs, out);
  return out;
}

std::vector<double> ObsNormalizer::stddev() const {
  std::vector<double> out(var_.size());
  for (std::size_t j = 0; j < var_.size(); ++j) out[j] = std::sqrt(var_[j] + 1e-8);
  return out;
}

void ObsNormalizer::restore(double count, std::vector<double> mean, std::vector<double> var) {
  if (mean.size() != dim() || var.size() != dim()) {
    throw std::invalid_argument("normalizer state has the wrong size");
  }
  count_ = count;
  mean_ = std::move(mean);
  var_ = std::move(var);
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> partition_envs(std::size_t num_envs, const std::vector<std::size_t>& archs) {
  if (archs.empty() || num_envs % archs.size() != 0) {
    throw std::invalid_argument("number of envs must be divisible by the meta-batch size");
  }
  const std::size_t per = num_envs / archs.size();
  std::vector<std::size_t> out(num_envs);
  for (std::size_t e = 0; e < num_envs; ++e) out[e] = archs[e / per];
  return out;
}

std::map<std::size_t, TrajectoryBatch> vec_rollout(
    std::vector<EnvInstance>& envs, const std::vector<std::size_t>& assignment,
    const std::map<std::size_t, ActorSnapshot>& policies, std::size_t horizon,
    ObsNormalizer& normalizer, bool update_normalizer) {
  if (assignment.size() != envs.size()) {
    throw std::invalid_argument("every env needs exactly one architecture");
  }
  if (envs.empty()) return {};
  const EnvSpec spec = envs.front().spec();
  const std::size_t od = spec.obs_dim, ad = spec.act_dim;

  std::map<std::size_t, TrajectoryBatch> out;
  for (std::size_t e = 0; e < envs.size(); ++e) {
    if (!policies.contains(assignment[e])) {
      throw std::invalid_argument("env " + std::to_string(e) + " is assigned architecture " +
                                  std::to_string(assignment[e]) + " which has no policy");
    }
    auto& b = out[assignment[e]];
    b.arch_index = assignment[e];
    b.env_ids.push_back(e);
  }
  for (auto& [arch, b] : out) {
    const std::size_t n = b.num_envs() * horizon;
    b.horizon = horizon;
    b.obs_dim = od;
    b.act_dim = ad;
    b.obs.assign(n * od, 0.0);
    b.actions.assign(n * ad, 0.0);
    b.rewards.assign(n, 0.0);
    b.dones.assign(n, 0);
    b.log_probs.assign(n, 0.0);
    b.values.assign(n, 0.0);
    b.truncation_values.assign(n, 0.0);
    b.bootstrap_values.assign(b.num_envs(), 0.0);
  }

  std::vector<double> raw(envs.size() * od);
  for (std::size_t e = 0; e < envs.size(); ++e) {
    const auto o = envs[e].observe();
    std::copy(o.begin(), o.end(), raw.begin() + e * od);
  }
  std::vector<double> actions(envs.size() * ad);

  for (std::size_t t = 0; t < horizon; ++t) {
    for (auto& [arch, b] : out) {
      const auto& actor = policies.at(arch);
      const std::size_t m = b.num_envs();
      Tensor obs({m, od});
      for (std::size_t i = 0; i < m; ++i) {
        normalizer.normalize_into(std::span<const double>(raw).subspan(b.env_ids[i] * od, od),
                                  obs.data().subspan(i * od, od));
      }
      const Tensor mean = policy_forward(actor.weights, obs.view());
      const std::vector<double> values = (*actor.critic)(obs.view());
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t e = b.env_ids[i];
        const std::size_t row = i * horizon + t;
        const auto mu = mean.data().subspan(i * ad, ad);
        const auto a = sample_action(mu, actor.std, envs[e].rng());
        std::copy(a.begin(), a.end(), actions.begin() + e * ad);
        std::copy(a.begin(), a.end(), b.actions.begin() + row * ad);
        std::copy_n(obs.data().begin() + i * od, od, b.obs.begin() + row * od);
        b.log_probs[row] = log_prob(mu, actor.std, a);
        b.values[row] = values[i];
      }
    }

    std::vector<std::size_t> finished;
    for (std::size_t e = 0; e < envs.size(); ++e) {
      const StepResult r = envs[e].step(std::span<const double>(actions).subspan(e * ad, ad));
      std::copy(r.obs.begin(), r.obs.end(), raw.begin() + e * od);
      if (r.done) finished.push_back(e);
      auto& b = out.at(assignment[e]);
      const std::size_t i = static_cast<std::size_t>(
          std::find(b.env_ids.begin(), b.env_ids.end(), e) - b.env_ids.begin());
      b.rewards[i * horizon + t] = r.reward;
      b.dones[i * horizon + t] = r.done ? 1 : 0;
    }
    // truncated episodes bootstrap from the value of their final state
    for (std::size_t e : finished) {
      auto& b = out.at(assignment[e]);
      const std::size_t i = static_cast<std::size_t>(
          std::find(b.env_ids.begin(), b.env_ids.end(), e) - b.env_ids.begin());
      Tensor obs({1, od});
      normalizer.normalize_into(std::span<const double>(raw).subspan(e * od, od), obs.data());
      b.truncation_values[i * horizon + t] = (*policies.at(assignment[e]).critic)(obs.view())[0];
      const auto o = envs[e].reset();
      std::copy(o.begin(), o.end(), raw.begin() + e * od);
    }
    if (update_normalizer) normalizer.update(raw, envs.size());
  }

  for (auto& [arch, b] : out) {
    const std::size_t m = b.num_envs();
    Tensor obs({m, od});
    for (std::size_t i = 0; i < m; ++i) {
      normalizer.normalize_into(std::span<const double>(raw).subspan(b.env_ids[i] * od, od),
                                obs.data().subspan(i * od, od));
    }
    b.bootstrap_values = (*policies.at(arch).critic)(obs.view());
  }
  return out;
}

std::vector<double> evaluate_policy(EnvKind kind, const GeneratedWeights& weights,
                                    const ObsNormalizer& normalizer,
                                    std::span<const std::uint64_t> episode_seeds) {
  const EnvSpec spec = env_spec(kind);
  const std::size_t n = episode_seeds.size();
  std::vector<EnvInstance> envs;
  envs.reserve(n);
  for (auto seed : episode_seeds) envs.emplace_back(kind, seed);
  std::vector<double> returns(n, 0.0);
  Tensor obs({n, spec.obs_dim});
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      normalizer.normalize_into(envs[i].observe(), obs.data().subspan(i * spec.obs_dim, spec.obs_dim));
    }
    const Tensor mean = policy_forward(weights, obs.view());
    for (std::size_t i = 0; i < n; ++i) {
      returns[i] += envs[i].step(mean.data().subspan(i * spec.act_dim, spec.act_dim)).reward;
    }
  }
  return returns;
}

}  // namespace hyperppo
