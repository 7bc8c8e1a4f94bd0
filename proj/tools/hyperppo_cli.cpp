// Command-line front end: training, sweeps, selection and export.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "hyperppo/evalsuite.hpp"
#include "hyperppo/trainer.hpp"

namespace fs = std::filesystem;
using namespace hyperppo;

namespace {

std::vector<std::size_t> parse_subset(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(';', start), text.size());
    const std::string item = text.substr(start, end - start);
    if (!item.empty()) out.push_back(arch_index(parse_arch(item)));
    start = end + 1;
  }
  if (out.empty()) throw std::invalid_argument("--subset names no architectures");
  return out;
}

void print_report(const IterationReport& r) {
  double ret = 0.0, pl = 0.0, vl = 0.0;
  std::size_t evaluated = 0;
  for (const auto& a : r.archs) {
    if (a.mean_return) {
      ret += *a.mean_return;
      ++evaluated;
    }
    pl += a.policy_loss;
    vl += a.value_loss;
  }
  const double n = static_cast<double>(r.archs.size());
  std::cout << "iter " << r.iteration << "  steps " << r.env_steps;
  if (evaluated) std::cout << "  return " << ret / static_cast<double>(evaluated);
  std::cout << "  policy_loss " << pl / n << "  value_loss " << vl / n << std::endl;
}

int run_training(TrainConfig config, const std::string& resume, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  std::unique_ptr<Trainer> trainer;
  if (!resume.empty()) {
    trainer = std::make_unique<Trainer>(load_checkpoint(resume));
  } else {
    trainer = std::make_unique<Trainer>(config);
  }
  std::ofstream csv(metrics_path, resume.empty() ? std::ios::trunc : std::ios::app);
  if (!csv) throw std::runtime_error("cannot write " + metrics_path);
  MetricsWriter writer(csv, /*header=*/resume.empty());
  auto on_iter = [&](const IterationReport& r) {
    print_report(r);
    save_checkpoint(trainer->checkpoint(), (fs::path(out_dir) / "latest.ckpt").string());
  };
  trainer->run(&writer, on_iter, (fs::path(out_dir) / "last_good.ckpt").string());
  const std::string final_path = (fs::path(out_dir) / "final.ckpt").string();
  save_checkpoint(trainer->checkpoint(), final_path);
  std::cout << "wrote " << final_path << " and " << metrics_path << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypernetwork PPO over a space of MLP architectures"};
  app.require_subcommand(1);

  std::string config_path, resume, out_dir = "run", arch_text, ckpt_path, baseline_path,
                                   table_path, env_text, subset_text, out_path;
  std::uint64_t seed = 0;
  std::size_t episodes = 0, grid_n = 11;
  double fraction = 0.9, grid_min = 0.0, grid_max = 0.0;
  std::optional<double> baseline_return;

  auto* train = app.add_subcommand("train", "train the hypernetwork");
  train->add_option("--config", config_path, "INI config")->check(CLI::ExistingFile);
  auto* train_seed = train->add_option("--seed", seed, "override run.seed");
  train->add_option("--resume", resume, "continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* base = app.add_subcommand("baseline", "train one fixed architecture directly");
  base->add_option("--config", config_path, "INI config")->required()->check(CLI::ExistingFile);
  base->add_option("--arch", arch_text, "hidden widths, e.g. 256,256,256")->required();
  auto* base_seed = base->add_option("--seed", seed, "override run.seed");
  base->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate every (or a subset of) architecture");
  sweep_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--env", env_text, "pointmass | pendulum | quad2d");
  sweep_cmd->add_option("--episodes", episodes, "episodes per architecture (default 4)");
  sweep_cmd->add_option("--subset", subset_text, "e.g. \"4;64;256,256\"");
  sweep_cmd->add_option("--seed", seed, "evaluation seed")->capture_default_str();
  sweep_cmd->add_option("--out", out_path, "output prefix for .json/.csv (default sweep)");

  auto* select_cmd = app.add_subcommand("select", "smallest architecture reaching a fraction");
  select_cmd->add_option("--table", table_path)->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--fraction", fraction)->capture_default_str();
  select_cmd->add_option("--baseline-return", baseline_return, "reported alongside");

  auto* dist_cmd = app.add_subcommand("dist", "number of architectures above each reward level");
  dist_cmd->add_option("--table", table_path)->required()->check(CLI::ExistingFile);
  dist_cmd->add_option("--grid-min", grid_min)->required();
  dist_cmd->add_option("--grid-max", grid_max)->required();
  dist_cmd->add_option("--grid-n", grid_n)->capture_default_str();

  auto* export_cmd = app.add_subcommand("export", "write a standalone policy file");
  export_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--arch", arch_text)->required();
  export_cmd->add_option("--out", out_path)->required();

  auto* compare_cmd = app.add_subcommand("compare", "hypernetwork vs directly trained policy");
  compare_cmd->add_option("--ckpt", ckpt_path)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--baseline", baseline_path)->required()->check(CLI::ExistingFile);
  compare_cmd->add_option("--arch", arch_text)->required();
  compare_cmd->add_option("--env", env_text);
  compare_cmd->add_option("--episodes", episodes, "episodes per policy (default 32)");
  compare_cmd->add_option("--seed", seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      if (config_path.empty() && resume.empty()) throw std::invalid_argument("train needs --config or --resume");
      TrainConfig config;
      if (!config_path.empty()) config = load_config(config_path);
      if (*train_seed) config.seed = seed;
      config.mode = TrainMode::kHyper;
      config.validate();
      return run_training(config, resume, out_dir);
    }
    if (base->parsed()) {
      TrainConfig config = load_config(config_path);
      if (*base_seed) config.seed = seed;
      config.mode = TrainMode::kBaseline;
      config.baseline_arch = parse_arch(arch_text);
      config.validate();
      return run_training(config, {}, out_dir);
    }
    if (sweep_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      SweepOptions opt;
      opt.episodes = episodes ? episodes : 4;
      opt.seed = seed;
      opt.checkpoint_id = fs::path(ckpt_path).filename().string();
      if (!subset_text.empty()) opt.subset = parse_subset(subset_text);
      const EnvKind env = env_text.empty() ? ckpt.config.env : parse_env_kind(env_text);
      const RewardTable table = sweep(ckpt, env, opt);
      const std::string prefix = out_path.empty() ? "sweep" : out_path;
      save_table(table, prefix + ".json", prefix + ".csv");
      std::cout << "rows " << table.rows.size() << "  average_reward " << average_reward(table)
                << "\nwrote " << prefix << ".json and " << prefix << ".csv" << std::endl;
      return 0;
    }
    if (select_cmd->parsed()) {
      const RewardTable table = load_table(table_path);
      const EnvSpec s = env_spec(table.env);
      const Selection best = select(table, 1.0, s.obs_dim, s.act_dim);
      const Selection pick = select(table, fraction, s.obs_dim, s.act_dim);
      std::cout << "max       " << format_arch(arch_at(best.arch_index)) << "  return "
                << best.mean_return << "  params " << best.params << "\n"
                << "fraction " << fraction << "  " << format_arch(arch_at(pick.arch_index))
                << "  return " << pick.mean_return << "  params " << pick.params << "\n";
      if (baseline_return) std::cout << "baseline  return " << *baseline_return << "\n";
      return 0;
    }
    if (dist_cmd->parsed()) {
      const RewardTable table = load_table(table_path);
      std::cout << "x,count\n";
      for (const auto& [x, count] : reward_distribution(table, linear_grid(grid_min, grid_max, grid_n))) {
        std::cout << x << ',' << count << '\n';
      }
      return 0;
    }
    if (export_cmd->parsed()) {
      export_policy(load_checkpoint(ckpt_path), parse_arch(arch_text), out_path);
      std::cout << "wrote " << out_path << std::endl;
      return 0;
    }
    if (compare_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const Checkpoint base_ckpt = load_checkpoint(baseline_path);
      const EnvKind env = env_text.empty() ? ckpt.config.env : parse_env_kind(env_text);
      const CompareReport r = compare_small(ckpt, base_ckpt, parse_arch(arch_text), env,
                                            episodes ? episodes : 32, seed);
      std::cout << "arch " << format_arch(r.spec) << "  env " << env_name(r.env) << "  episodes "
                << r.episodes << "\n"
                << "hypernetwork  " << r.hyper.mean << " +- " << r.hyper.std << "\n"
                << "baseline      " << r.baseline.mean << " +- " << r.baseline.std << std::endl;
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
