#include "hyperppo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperppo/baseline.hpp"
#include "hyperppo/hypernet.hpp"

namespace hyperppo {

namespace {

constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kEnvStream = 2;
constexpr std::uint64_t kTrainerStream = 3;
constexpr std::uint64_t kEvalStream = 4;

double to_float(double x) { return static_cast<double>(static_cast<float>(x)); }

void round_span(std::span<double> v) {
  for (double& x : v) x = to_float(x);
}

std::unique_ptr<ActorCritic> fresh_model(const TrainConfig& c) {
  const std::uint64_t seed = derive_seed(c.seed, kModelStream);
  if (c.mode == TrainMode::kHyper) return std::make_unique<HyperNet>(c.hypernet(), seed);
  const EnvSpec s = env_spec(c.env);
  return std::make_unique<DirectPolicy>(c.baseline_arch, s.obs_dim, s.act_dim, seed);
}

StdMode effective_std_mode(const TrainConfig& c) {
  return c.mode == TrainMode::kBaseline ? StdMode::kCsd : c.std_mode;
}

}  // namespace

double EvalSummary::mean() const {
  if (returns.empty()) return 0.0;
  return std::accumulate(returns.begin(), returns.end(), 0.0) /
         static_cast<double>(returns.size());
}

MetricsWriter::MetricsWriter(std::ostream& out, bool header) : out_(out) {
  if (header) out_ << "iter,env_steps,arch_index,widths,mean_return,policy_loss,value_loss,std_mean\n";
  out_.flush();
}

void MetricsWriter::write(const IterationReport& r) {
  const auto precision = out_.precision(10);
  for (const auto& a : r.archs) {
    out_ << r.iteration << ',' << r.env_steps << ',' << a.arch_index << ",\""
         << format_arch(arch_at(a.arch_index)) << "\",";
    if (a.mean_return) out_ << *a.mean_return;
    out_ << ',' << a.policy_loss << ',' << a.value_loss << ',' << a.std_mean << '\n';
  }
  out_.precision(precision);
  out_.flush();
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config),
      model_((config.validate(), fresh_model(config))),
      adam_(model_->layout().total(), config.ppo.adam()),
      stds_(effective_std_mode(config), model_->act_dim(), config.ppo.adam()),
      normalizer_(model_->obs_dim()),
      reward_scaler_(config.num_envs, config.ppo.gamma),
      dist_(config.sampling),
      rng_(derive_seed(config.seed, kTrainerStream)) {
  round_span(model_->params());
  envs_.reserve(config.num_envs);
  for (std::size_t e = 0; e < config.num_envs; ++e) {
    envs_.emplace_back(config.env, derive_seed(config.seed, kEnvStream, e));
    envs_.back().reset();
  }
}

Trainer::Trainer(const Checkpoint& c)
    : config_(c.config),
      model_(make_model(c)),
      adam_(c.adam),
      stds_(c.stds),
      normalizer_(make_normalizer(c)),
      reward_scaler_(c.config.num_envs, c.config.ppo.gamma),
      dist_(c.config.sampling),
      rng_(rng_from_string(c.trainer_rng)),
      iteration_(c.iteration),
      env_steps_(c.env_steps) {
  config_.validate();
  if (c.envs.size() != config_.num_envs) {
    throw CheckpointError("checkpoint holds " + std::to_string(c.envs.size()) +
                          " env states, config expects " + std::to_string(config_.num_envs));
  }
  if (adam_.m.size() != model_->layout().total()) {
    throw CheckpointError("optimizer state does not match the parameter layout");
  }
  reward_scaler_.restore(c.env_returns, c.ret_count, c.ret_mean, c.ret_var);
  for (std::size_t e = 0; e < c.envs.size(); ++e) {
    envs_.emplace_back(config_.env, 0);
    envs_.back().set_state(c.envs[e].state, c.envs[e].steps);
    envs_.back().set_rng(rng_from_string(c.envs[e].rng));
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config = config_;
  c.kind = model_->kind();
  c.layout = model_->layout();
  c.params.assign(model_->params().begin(), model_->params().end());
  c.adam = adam_;
  c.stds = stds_;
  c.trainer_rng = rng_to_string(rng_);
  c.norm_count = normalizer_.count();
  c.norm_mean = normalizer_.mean();
  c.norm_var = normalizer_.var();
  for (const auto& env : envs_) {
    c.envs.push_back({env.state(), env.step_count(), rng_to_string(env.rng())});
  }
  c.env_returns = reward_scaler_.returns();
  c.ret_count = reward_scaler_.stats().count();
  c.ret_mean = reward_scaler_.stats().mean()[0];
  c.ret_var = reward_scaler_.stats().var()[0];
  c.iteration = iteration_;
  c.env_steps = env_steps_;
  return c;
}

std::vector<std::uint64_t> Trainer::eval_seeds() const {
  std::vector<std::uint64_t> seeds(config_.eval_episodes);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    seeds[i] = derive_seed(config_.seed, kEvalStream, i);
  }
  return seeds;
}

EvalSummary Trainer::evaluate(const std::vector<std::size_t>& archs) const {
  EvalSummary out;
  const auto seeds = eval_seeds();
  for (std::size_t a : archs) {
    const auto weights = model_->generate_weights(arch_at(a));
    const auto returns = evaluate_policy(config_.env, weights, normalizer_, seeds);
    out.archs.push_back(a);
    out.returns.push_back(std::accumulate(returns.begin(), returns.end(), 0.0) /
                          static_cast<double>(returns.size()));
  }
  return out;
}

std::vector<std::size_t> Trainer::sample_archs() {
  if (config_.mode == TrainMode::kBaseline) return {arch_index(config_.baseline_arch)};
  return dist_.sample_without_replacement(config_.meta_batch, rng_);
}

IterationReport Trainer::iterate() {
  const PpoConfig& ppo = config_.ppo;
  const std::vector<std::size_t> archs = sample_archs();
  last_archs_ = archs;

  IterationReport report;
  report.iteration = iteration_;
  const bool eval_now = config_.eval_every > 0 && iteration_ % config_.eval_every == 0;
  const auto seeds = eval_seeds();

  std::map<std::size_t, ActorSnapshot> policies;
  std::map<std::size_t, ArchIterationStats> stats;
  for (std::size_t a : archs) {
    const ArchSpec& spec = arch_at(a);
    ActorSnapshot snap;
    snap.weights = model_->generate_weights(spec);
    snap.std = stds_.get_std(a);
    snap.critic = std::make_shared<const CriticEvaluator>(*model_, model_->conditioning(spec));
    ArchIterationStats s;
    s.arch_index = a;
    if (eval_now) {
      const auto returns = evaluate_policy(config_.env, snap.weights, normalizer_, seeds);
      s.mean_return = std::accumulate(returns.begin(), returns.end(), 0.0) /
                      static_cast<double>(returns.size());
    }
    stats[a] = s;
    policies.emplace(a, std::move(snap));
  }

  const auto assignment = partition_envs(config_.num_envs, archs);
  auto batches = vec_rollout(envs_, assignment, policies, config_.rollout_length, normalizer_);
  for (const auto& [a, batch] : batches) {
    stats.at(a).rollout_reward = std::accumulate(batch.rewards.begin(), batch.rewards.end(), 0.0) /
                                 static_cast<double>(batch.size());
  }
  if (ppo.scale_rewards) reward_scaler_.apply(batches);
  env_steps_ += static_cast<std::uint64_t>(config_.num_envs) * config_.rollout_length;
  report.env_steps = env_steps_;

  std::map<std::size_t, AdvantageSet> advantages;
  std::size_t shards = 0;
  for (const auto& [a, batch] : batches) {
    advantages.emplace(a, compute_advantages(batch, ppo.gamma, ppo.lambda));
    shards = std::max(shards, (batch.size() + ppo.minibatch_size - 1) / ppo.minibatch_size);
  }

  for (std::size_t epoch = 0; epoch < ppo.epochs; ++epoch) {
    std::map<std::size_t, std::vector<std::size_t>> order;
    for (const auto& [a, batch] : batches) {
      auto& perm = order[a];
      perm.resize(batch.size());
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng_);
    }
    for (std::size_t j = 0; j < shards; ++j) {
      std::vector<ArchMinibatch> minibatches;
      for (const auto& [a, batch] : batches) {
        const auto& perm = order.at(a);
        const std::size_t lo = j * ppo.minibatch_size;
        if (lo >= perm.size()) continue;
        const std::size_t hi = std::min(perm.size(), lo + ppo.minibatch_size);
        minibatches.push_back(make_minibatch(
            batch, advantages.at(a), std::span<const std::size_t>(perm).subspan(lo, hi - lo)));
      }
      const HyperPpoLoss objective(*model_, stds_, std::move(minibatches), ppo);
      LossResult res = objective.evaluate(true);

      double sq = 0.0;
      for (double g : res.param_grad) sq += g * g;
      for (const auto& [a, g] : res.log_std_grad) {
        for (double x : g) sq += x * x;
      }
      const double norm = std::sqrt(sq);
      report.grad_norm = norm;
      if (!std::isfinite(norm)) throw NonFiniteLossError("non-finite gradient norm");
      if (ppo.max_grad_norm > 0.0 && norm > ppo.max_grad_norm) {
        const double scale = ppo.max_grad_norm / (norm + 1e-12);
        for (double& g : res.param_grad) g *= scale;
        for (auto& [a, g] : res.log_std_grad) {
          for (double& x : g) x *= scale;
        }
      }
      // params and moments come back float-representable
      adam_step(model_->params(), res.param_grad, adam_, true);
      stds_.apply_gradients(res.log_std_grad);
      stds_.round_to_float();

      for (const auto& t : res.terms) {
        auto& s = stats.at(t.arch_index);
        s.policy_loss += -t.surrogate;
        s.value_loss += t.value_loss;
        s.approx_kl += t.approx_kl;
        s.clip_fraction += t.clip_fraction;
      }
    }
  }

  for (auto& [a, s] : stats) {
    const std::size_t n = std::max<std::size_t>(
        1, (batches.at(a).size() + ppo.minibatch_size - 1) / ppo.minibatch_size * ppo.epochs);
    s.policy_loss /= static_cast<double>(n);
    s.value_loss /= static_cast<double>(n);
    s.approx_kl /= static_cast<double>(n);
    s.clip_fraction /= static_cast<double>(n);
    const auto std = stds_.get_std(a);
    s.std_mean = std::accumulate(std.begin(), std.end(), 0.0) / static_cast<double>(std.size());
    report.archs.push_back(s);
  }
  ++iteration_;
  return report;
}

void Trainer::run(MetricsWriter* metrics,
                  const std::function<void(const IterationReport&)>& on_iteration,
                  const std::string& failure_checkpoint) {
  while (!finished()) {
    IterationReport report;
    try {
      report = iterate();
    } catch (const NonFiniteLossError&) {
      if (!failure_checkpoint.empty()) save_checkpoint(checkpoint(), failure_checkpoint);
      throw;
    }
    if (metrics) metrics->write(report);
    if (on_iteration) on_iteration(report);
  }
}

}  // namespace hyperppo
