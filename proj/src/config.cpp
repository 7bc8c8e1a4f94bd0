#include "hyperppo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hyperppo {

TrainMode parse_train_mode(std::string_view text) {
  if (text == "hyper") return TrainMode::kHyper;
  if (text == "baseline") return TrainMode::kBaseline;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "' (hyper|baseline)");
}

std::string_view train_mode_name(TrainMode mode) {
  return mode == TrainMode::kHyper ? "hyper" : "baseline";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (num_envs == 0) fail("env.num_envs must be >= 1");
  if (rollout_length == 0) fail("env.rollout_length must be >= 1");
  if (budget == 0) fail("run.budget must be > 0");
  if (mode == TrainMode::kHyper) {
    if (meta_batch == 0 || meta_batch > kSpaceSize) fail("run.meta_batch must be in [1, 2800]");
    if (num_envs % meta_batch != 0) {
      fail("env.num_envs (" + std::to_string(num_envs) + ") must be divisible by run.meta_batch (" +
           std::to_string(meta_batch) + ")");
    }
  } else {
    hyperppo::validate(baseline_arch);
  }
  if (eval_every > 0 && eval_episodes == 0) fail("run.eval_episodes must be >= 1");
  if (hyper_hidden == 0 || hyper_rounds == 0 || hyper_embedding == 0) {
    fail("hypernetwork sizes must be >= 1");
  }
  ppo.validate();
}

HyperNetConfig TrainConfig::hypernet() const {
  const EnvSpec s = env_spec(env);
  return {s.obs_dim, s.act_dim, hyper_hidden, hyper_rounds, hyper_embedding};
}

std::size_t TrainConfig::archs_per_iteration() const {
  return mode == TrainMode::kHyper ? meta_batch : 1;
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !(in >> std::ws).eof()) {
    throw std::invalid_argument("config: cannot parse " + key + " = '" + value + "'");
  }
  return out;
}

template <typename T>
Setter number(T TrainConfig::*field, std::string key) {
  return [field, key](TrainConfig& c, const std::string& v) { c.*field = parse_number<T>(key, v); };
}

template <typename T>
Setter ppo_number(T PpoConfig::*field, std::string key) {
  return [field, key](TrainConfig& c, const std::string& v) {
    c.ppo.*field = parse_number<T>(key, v);
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.mode", [](TrainConfig& c, const std::string& v) { c.mode = parse_train_mode(v); }},
      {"run.seed", number(&TrainConfig::seed, "run.seed")},
      {"run.budget", number(&TrainConfig::budget, "run.budget")},
      {"run.meta_batch", number(&TrainConfig::meta_batch, "run.meta_batch")},
      {"run.sampling",
       [](TrainConfig& c, const std::string& v) { c.sampling = parse_sampling_mode(v); }},
      {"run.std", [](TrainConfig& c, const std::string& v) { c.std_mode = parse_std_mode(v); }},
      {"run.eval_every", number(&TrainConfig::eval_every, "run.eval_every")},
      {"run.eval_episodes", number(&TrainConfig::eval_episodes, "run.eval_episodes")},
      {"run.arch", [](TrainConfig& c, const std::string& v) { c.baseline_arch = parse_arch(v); }},
      {"run.hyper_hidden", number(&TrainConfig::hyper_hidden, "run.hyper_hidden")},
      {"run.hyper_rounds", number(&TrainConfig::hyper_rounds, "run.hyper_rounds")},
      {"run.hyper_embedding", number(&TrainConfig::hyper_embedding, "run.hyper_embedding")},
      {"env.env", [](TrainConfig& c, const std::string& v) { c.env = parse_env_kind(v); }},
      {"env.num_envs", number(&TrainConfig::num_envs, "env.num_envs")},
      {"env.rollout_length", number(&TrainConfig::rollout_length, "env.rollout_length")},
      {"ppo.gamma", ppo_number(&PpoConfig::gamma, "ppo.gamma")},
      {"ppo.lambda", ppo_number(&PpoConfig::lambda, "ppo.lambda")},
      {"ppo.clip", ppo_number(&PpoConfig::clip, "ppo.clip")},
      {"ppo.value_coef", ppo_number(&PpoConfig::value_coef, "ppo.value_coef")},
      {"ppo.entropy_coef", ppo_number(&PpoConfig::entropy_coef, "ppo.entropy_coef")},
      {"ppo.epochs", ppo_number(&PpoConfig::epochs, "ppo.epochs")},
      {"ppo.minibatch_size", ppo_number(&PpoConfig::minibatch_size, "ppo.minibatch_size")},
      {"ppo.learning_rate", ppo_number(&PpoConfig::learning_rate, "ppo.learning_rate")},
      {"ppo.max_grad_norm", ppo_number(&PpoConfig::max_grad_norm, "ppo.max_grad_norm")},
      {"ppo.adam_beta1", ppo_number(&PpoConfig::adam_beta1, "ppo.adam_beta1")},
      {"ppo.adam_beta2", ppo_number(&PpoConfig::adam_beta2, "ppo.adam_beta2")},
      {"ppo.scale_rewards",
       [](TrainConfig& c, const std::string& v) {
         if (v == "true" || v == "1") c.ppo.scale_rewards = true;
         else if (v == "false" || v == "0") c.ppo.scale_rewards = false;
         else throw std::invalid_argument("config: ppo.scale_rewards must be true or false");
       }},
      {"ppo.adam_epsilon", ppo_number(&PpoConfig::adam_epsilon, "ppo.adam_epsilon")},
  };
  return table;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.message() + " at line " +
                                std::to_string(e.line()));
  }
  TrainConfig config;
  for (const auto& [section, body] : tree) {
    if (section != "run" && section != "env" && section != "ppo") {
      throw std::invalid_argument("config: unknown section [" + section + "]");
    }
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument("config: key '" + section + "' outside of a section");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const auto it = setters().find(full);
      if (it == setters().end()) throw std::invalid_argument("config: unknown key " + full);
      it->second(config, node.data());
    }
  }
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_ini(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "[run]\n"
      << "mode = " << train_mode_name(c.mode) << "\n"
      << "seed = " << c.seed << "\n"
      << "budget = " << c.budget << "\n"
      << "meta_batch = " << c.meta_batch << "\n"
      << "sampling = " << sampling_mode_name(c.sampling) << "\n"
      << "std = " << std_mode_name(c.std_mode) << "\n"
      << "eval_every = " << c.eval_every << "\n"
      << "eval_episodes = " << c.eval_episodes << "\n"
      << "arch = " << format_arch(c.baseline_arch) << "\n"
      << "hyper_hidden = " << c.hyper_hidden << "\n"
      << "hyper_rounds = " << c.hyper_rounds << "\n"
      << "hyper_embedding = " << c.hyper_embedding << "\n"
      << "\n[env]\n"
      << "env = " << env_name(c.env) << "\n"
      << "num_envs = " << c.num_envs << "\n"
      << "rollout_length = " << c.rollout_length << "\n"
      << "\n[ppo]\n"
      << "gamma = " << c.ppo.gamma << "\n"
      << "lambda = " << c.ppo.lambda << "\n"
      << "clip = " << c.ppo.clip << "\n"
      << "value_coef = " << c.ppo.value_coef << "\n"
      << "entropy_coef = " << c.ppo.entropy_coef << "\n"
      << "epochs = " << c.ppo.epochs << "\n"
      << "minibatch_size = " << c.ppo.minibatch_size << "\n"
      << "learning_rate = " << c.ppo.learning_rate << "\n"
      << "max_grad_norm = " << c.ppo.max_grad_norm << "\n"
      << "adam_beta1 = " << c.ppo.adam_beta1 << "\n"
      << "adam_beta2 = " << c.ppo.adam_beta2 << "\n"
      << "adam_epsilon = " << c.ppo.adam_epsilon << "\n"
      << "scale_rewards = " << (c.ppo.scale_rewards ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace hyperppo
