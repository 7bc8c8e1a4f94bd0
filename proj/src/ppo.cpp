#include "hyperppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hyperppo {

void PpoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must be in [0,1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("ppo.lambda must be in [0,1]");
  if (!(clip > 0.0)) throw std::invalid_argument("ppo.clip must be > 0");
  if (epochs == 0) throw std::invalid_argument("ppo.epochs must be >= 1");
  if (minibatch_size == 0) throw std::invalid_argument("ppo.minibatch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ppo.learning_rate must be > 0");
  if (value_coef < 0.0 || entropy_coef < 0.0 || max_grad_norm < 0.0) {
    throw std::invalid_argument("ppo coefficients must be non-negative");
  }
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double bootstrap_value, std::span<const std::uint8_t> dones, double gamma,
                      double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("compute_gae: rewards, values and dones must have equal length");
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(rewards.begin(), rewards.end(), finite) ||
      !std::all_of(values.begin(), values.end(), finite) || !std::isfinite(bootstrap_value)) {
    throw std::invalid_argument("compute_gae: non-finite input");
  }
  GaeResult out{std::vector<double>(n), std::vector<double>(n)};
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t t = n; t-- > 0;) {
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.value_targets[t] = next_adv + values[t];
    next_value = values[t];
  }
  return out;
}

void normalize_advantages(std::span<double> adv) {
  if (adv.empty()) return;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= static_cast<double>(adv.size());
  const double inv = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& a : adv) a = (a - mean) * inv;
}

double importance_ratio(double logp_new, double logp_old) { return std::exp(logp_new - logp_old); }

std::vector<double> importance_ratio(std::span<const double> logp_new,
                                     std::span<const double> logp_old) {
  if (logp_new.size() != logp_old.size()) throw std::invalid_argument("importance_ratio: size mismatch");
  std::vector<double> out(logp_new.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = importance_ratio(logp_new[i], logp_old[i]);
  return out;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double value_loss(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw std::invalid_argument("value_loss: sizes must match and be non-empty");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predicted.size());
}

NodeId clipped_surrogate_graph(Graph& g, NodeId ratio, NodeId advantage, double clip) {
  return g.min(g.mul(ratio, advantage), g.mul(g.clip(ratio, 1.0 - clip, 1.0 + clip), advantage));
}

NodeId value_loss_graph(Graph& g, NodeId predicted, NodeId target) {
  return g.mean(g.square(g.sub(predicted, target)));
}

AdvantageSet compute_advantages(const TrajectoryBatch& batch, double gamma, double lambda,
                                bool normalize) {
  AdvantageSet out;
  out.arch_index = batch.arch_index;
  out.advantages.resize(batch.size());
  out.value_targets.resize(batch.size());
  const std::size_t T = batch.horizon;
  std::vector<double> rewards(T);
  for (std::size_t i = 0; i < batch.num_envs(); ++i) {
    const std::size_t base = i * T;
    for (std::size_t t = 0; t < T; ++t) {
      rewards[t] = batch.rewards[base + t];
      if (batch.dones[base + t]) rewards[t] += gamma * batch.truncation_values[base + t];
    }
    const auto gae = compute_gae(rewards, std::span(batch.values).subspan(base, T),
                                 batch.bootstrap_values[i],
                                 std::span(batch.dones).subspan(base, T), gamma, lambda);
    std::copy(gae.advantages.begin(), gae.advantages.end(), out.advantages.begin() + base);
    std::copy(gae.value_targets.begin(), gae.value_targets.end(), out.value_targets.begin() + base);
  }
  if (normalize) normalize_advantages(out.advantages);
  return out;
}

ReturnScaler::ReturnScaler(std::size_t num_envs, double gamma)
    : gamma_(gamma), returns_(num_envs, 0.0), stats_(1) {}

double ReturnScaler::scale() const { return std::sqrt(stats_.var()[0] + 1e-8); }

void ReturnScaler::apply(std::map<std::size_t, TrajectoryBatch>& batches) {
  std::size_t horizon = 0;
  for (const auto& [a, b] : batches) {
    horizon = b.horizon;
    for (std::size_t e : b.env_ids) {
      if (e >= returns_.size()) throw std::invalid_argument("return scaler: env id out of range");
    }
  }
  std::vector<double> rets(returns_.size());
  for (std::size_t t = 0; t < horizon; ++t) {
    for (const auto& [a, b] : batches) {
      for (std::size_t i = 0; i < b.num_envs(); ++i) {
        const std::size_t e = b.env_ids[i];
        returns_[e] = returns_[e] * gamma_ + b.rewards[i * horizon + t];
      }
    }
    stats_.update(returns_, returns_.size());
    const double s = scale();
    for (auto& [a, b] : batches) {
      for (std::size_t i = 0; i < b.num_envs(); ++i) {
        const std::size_t row = i * horizon + t;
        b.rewards[row] = std::clamp(b.rewards[row] / s, -10.0, 10.0);
        if (b.dones[row]) returns_[b.env_ids[i]] = 0.0;
      }
    }
  }
}

void ReturnScaler::restore(std::vector<double> returns, double count, double mean, double var) {
  if (returns.size() != returns_.size()) {
    throw std::invalid_argument("return scaler state has the wrong number of envs");
  }
  returns_ = std::move(returns);
  stats_.restore(count, {mean}, {var});
}

ArchMinibatch make_minibatch(const TrajectoryBatch& batch, const AdvantageSet& adv,
                             std::span<const std::size_t> rows) {
  if (adv.arch_index != batch.arch_index) {
    throw NoMixingError("advantages of architecture " + std::to_string(adv.arch_index) +
                        " paired with data of architecture " + std::to_string(batch.arch_index));
  }
  const std::size_t n = rows.size(), od = batch.obs_dim, ad = batch.act_dim;
  ArchMinibatch mb;
  mb.arch_index = batch.arch_index;
  mb.sample_arch.assign(n, batch.arch_index);
  mb.obs = Tensor({n, od});
  mb.actions = Tensor({n, ad});
  mb.old_log_probs = Tensor({n, 1});
  mb.advantages = Tensor({n, 1});
  mb.value_targets = Tensor({n, 1});
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t r = rows[k];
    if (r >= batch.size()) throw std::out_of_range("minibatch row out of range");
    std::copy_n(batch.obs.begin() + r * od, od, mb.obs.data().begin() + k * od);
    std::copy_n(batch.actions.begin() + r * ad, ad, mb.actions.data().begin() + k * ad);
    mb.old_log_probs[k] = batch.log_probs[r];
    mb.advantages[k] = adv.advantages[r];
    mb.value_targets[k] = adv.value_targets[r];
  }
  return mb;
}

HyperPpoLoss::HyperPpoLoss(const ActorCritic& model, const StdStore& stds,
                           std::vector<ArchMinibatch> batches, const PpoConfig& config)
    : clip_(config.clip), model_(model), batches_(std::move(batches)) {
  if (batches_.empty()) throw std::invalid_argument("hyperppo_loss: no minibatches");
  for (const auto& mb : batches_) {
    for (std::size_t tag : mb.sample_arch) {
      if (tag != mb.arch_index) {
        throw NoMixingError("minibatch for architecture " + std::to_string(mb.arch_index) +
                            " contains a sample collected under architecture " +
                            std::to_string(tag));
      }
    }
    if (mb.size() == 0) throw std::invalid_argument("hyperppo_loss: empty minibatch");
  }
  std::stable_sort(batches_.begin(), batches_.end(),
                   [](const auto& a, const auto& b) { return a.arch_index < b.arch_index; });
  for (std::size_t i = 1; i < batches_.size(); ++i) {
    if (batches_[i].arch_index == batches_[i - 1].arch_index) {
      throw std::invalid_argument("hyperppo_loss: architecture appears twice in one update");
    }
  }

  const std::size_t ad = model.act_dim();
  scope_ = std::make_unique<ParamScope>(graph_, model.layout(), model.params());
  Graph& g = graph_;
  log_std_rows_.reserve(batches_.size());

  NodeId total = 0;
  for (std::size_t k = 0; k < batches_.size(); ++k) {
    const auto& mb = batches_[k];
    const ArchSpec& spec = arch_at(mb.arch_index);
    const ArchHeads heads = model.build_arch(*scope_, spec, true, true);

    auto bind = [&](const Tensor& t, const char* name) {
      const NodeId id = g.input(name);
      bindings_[id] = t.view();
      return id;
    };
    const NodeId obs = bind(mb.obs, "obs");
    const NodeId actions = bind(mb.actions, "actions");
    const NodeId old_lp = bind(mb.old_log_probs, "old_log_probs");
    const NodeId advantages = bind(mb.advantages, "advantages");
    const NodeId targets = bind(mb.value_targets, "value_targets");
    log_std_rows_.emplace_back(Shape{1, ad}, stds.log_std(mb.arch_index));
    const NodeId log_std = bind(log_std_rows_.back(), "log_std");

    const NodeId mean = policy_forward_graph(g, heads.layers, obs);
    const NodeId logp = log_prob_graph(g, mean, log_std, actions, ad);
    const NodeId ratio = g.exp(g.sub(logp, old_lp));
    const NodeId surrogate = g.mean(clipped_surrogate_graph(g, ratio, advantages, config.clip));
    const NodeId value = model.value_graph(*scope_, obs, heads.conditioning);
    const NodeId vloss = value_loss_graph(g, value, targets);
    const NodeId entropy = entropy_graph(g, log_std, ad);

    NodeId term = g.add(g.affine(surrogate, -1.0), g.affine(vloss, config.value_coef));
    term = g.add(term, g.affine(entropy, -config.entropy_coef));
    total = k == 0 ? term : g.add(total, term);
    nodes_.push_back({mb.arch_index, log_std, surrogate, vloss, entropy, ratio});
  }
  loss_ = g.affine(total, 1.0 / static_cast<double>(batches_.size()));
  scope_->bind(bindings_);
}

LossResult HyperPpoLoss::evaluate(bool with_grad) const {
  Evaluation eval = forward(graph_, bindings_);
  LossResult out;
  out.loss = eval.scalar(loss_);
  if (!std::isfinite(out.loss)) throw NonFiniteLossError("hyperppo_loss: non-finite loss");
  for (const auto& n : nodes_) {
    ArchLossTerms t{n.arch_index, eval.scalar(n.surrogate), eval.scalar(n.value_loss),
                    eval.scalar(n.entropy)};
    const auto ratio = eval.value(n.ratio).data;
    for (double r : ratio) {
      t.approx_kl += (r - 1.0) - std::log(r);
      t.clip_fraction += std::abs(r - 1.0) > clip_ ? 1.0 : 0.0;
    }
    t.approx_kl /= static_cast<double>(ratio.size());
    t.clip_fraction /= static_cast<double>(ratio.size());
    out.terms.push_back(t);
  }
  if (!with_grad) return out;

  out.param_grad.assign(model_.layout().total(), 0.0);
  GradSinks sinks = scope_->sinks(out.param_grad);
  const Gradients grads = backward(graph_, eval, loss_, sinks);
  for (const auto& n : nodes_) {
    const auto& gt = grads.at(n.log_std);
    out.log_std_grad[n.arch_index] = std::vector<double>(gt.data().begin(), gt.data().end());
  }
  return out;
}

}  // namespace hyperppo
