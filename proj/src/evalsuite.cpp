#include "hyperppo/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <sstream>

#include "hyperppo/baseline.hpp"
#include "hyperppo/binary_io.hpp"

namespace hyperppo {

namespace {

constexpr std::string_view kExportMagic = "HPOL";

void check_env(const ActorCritic& model, EnvKind env) {
  const EnvSpec s = env_spec(env);
  if (s.obs_dim != model.obs_dim() || s.act_dim != model.act_dim()) {
    throw std::invalid_argument("env " + std::string(env_name(env)) +
                                " does not match the model's observation/action sizes");
  }
}

std::string write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  return path;
}

}  // namespace

std::uint64_t sweep_episode_seed(std::uint64_t seed, std::size_t arch_index, std::size_t episode) {
  return derive_seed(seed, arch_index, episode);
}

ReturnStats return_stats(std::vector<double> returns) {
  ReturnStats s;
  if (!returns.empty()) {
    const double n = static_cast<double>(returns.size());
    s.mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double sq = 0.0;
    for (double r : returns) sq += (r - s.mean) * (r - s.mean);
    s.std = std::sqrt(sq / n);
  }
  s.returns = std::move(returns);
  return s;
}

RewardTable sweep(const ActorCritic& model, const ObsNormalizer& normalizer, EnvKind env,
                  const SweepOptions& options) {
  if (options.episodes == 0) throw std::invalid_argument("sweep: episodes per arch must be >= 1");
  check_env(model, env);
  std::vector<std::size_t> archs;
  if (options.subset) {
    archs = *options.subset;
  } else {
    archs.resize(kSpaceSize);
    std::iota(archs.begin(), archs.end(), std::size_t{0});
  }

  RewardTable table;
  table.checkpoint = options.checkpoint_id;
  table.env = env;
  table.seed = options.seed;
  table.episodes_per_arch = options.episodes;
  table.rows.reserve(archs.size());
  std::vector<std::uint64_t> seeds(options.episodes);
  for (std::size_t a : archs) {
    const GeneratedWeights weights = model.generate_weights(arch_at(a));
    for (std::size_t e = 0; e < seeds.size(); ++e) seeds[e] = sweep_episode_seed(options.seed, a, e);
    const ReturnStats s = return_stats(evaluate_policy(env, weights, normalizer, seeds));
    table.rows.push_back({a, s.mean, s.std, options.episodes});
  }
  return table;
}

RewardTable sweep(const Checkpoint& ckpt, EnvKind env, SweepOptions options) {
  const auto model = make_model(ckpt);
  if (!options.subset && ckpt.kind == ModelKind::kBaseline) {
    options.subset = std::vector<std::size_t>{arch_index(ckpt.config.baseline_arch)};
  }
  return sweep(*model, make_normalizer(ckpt), env, options);
}

double average_reward(const RewardTable& table) {
  if (table.rows.empty()) throw std::invalid_argument("average_reward: empty table");
  double sum = 0.0;
  for (const auto& r : table.rows) sum += r.mean_return;
  return sum / static_cast<double>(table.rows.size());
}

double selection_threshold(double max_return, double fraction) {
  return max_return - (1.0 - fraction) * std::abs(max_return);
}

Selection select(const RewardTable& table, double fraction, std::size_t obs_dim,
                 std::size_t act_dim) {
  if (table.rows.empty()) throw std::invalid_argument("select: empty table");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("select: fraction must be in (0, 1]");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : table.rows) best = std::max(best, r.mean_return);
  const double threshold = selection_threshold(best, fraction);

  const RewardRow* chosen = nullptr;
  std::size_t chosen_params = 0;
  for (const auto& r : table.rows) {
    if (!(r.mean_return >= threshold)) continue;
    const ArchSpec& spec = arch_at(r.arch_index);
    const std::size_t params = param_count(spec, obs_dim, act_dim);
    if (chosen) {
      const ArchSpec& cur = arch_at(chosen->arch_index);
      const auto key = std::make_tuple(params, spec.depth(), std::cref(spec.widths));
      const auto cur_key = std::make_tuple(chosen_params, cur.depth(), std::cref(cur.widths));
      if (!(key < cur_key)) continue;
    }
    chosen = &r;
    chosen_params = params;
  }
  return {chosen->arch_index, chosen->mean_return, chosen_params};
}

SelectionReport selection_report(const RewardTable& table, std::size_t obs_dim,
                                 std::size_t act_dim, std::optional<double> baseline_return) {
  return {select(table, 1.0, obs_dim, act_dim), select(table, 0.9, obs_dim, act_dim),
          select(table, 0.8, obs_dim, act_dim), baseline_return};
}

std::vector<std::pair<double, std::size_t>> reward_distribution(const RewardTable& table,
                                                                const std::vector<double>& grid) {
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw std::invalid_argument("reward_distribution: grid must be sorted ascending");
  }
  std::vector<double> returns;
  returns.reserve(table.rows.size());
  for (const auto& r : table.rows) returns.push_back(r.mean_return);
  std::sort(returns.begin(), returns.end());
  std::vector<std::pair<double, std::size_t>> out;
  out.reserve(grid.size());
  for (double x : grid) {
    const auto above = returns.end() - std::upper_bound(returns.begin(), returns.end(), x);
    out.emplace_back(x, static_cast<std::size_t>(above));
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0 || hi < lo) throw std::invalid_argument("grid needs n >= 1 and min <= max");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

std::string table_to_json(const RewardTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    rows.push_back({{"arch_index", r.arch_index},
                    {"widths", format_arch(arch_at(r.arch_index))},
                    {"mean_return", r.mean_return},
                    {"return_std", r.return_std},
                    {"episodes", r.episodes}});
  }
  const nlohmann::json doc = {
      {"metadata",
       {{"checkpoint", t.checkpoint},
        {"env", env_name(t.env)},
        {"seed", t.seed},
        {"episodes_per_arch", t.episodes_per_arch},
        {"rows", t.rows.size()}}},
      {"rows", rows},
  };
  return doc.dump(2);
}

RewardTable table_from_json(const std::string& text) {
  RewardTable t;
  try {
    const auto doc = nlohmann::json::parse(text);
    const auto& meta = doc.at("metadata");
    t.checkpoint = meta.at("checkpoint").get<std::string>();
    t.env = parse_env_kind(meta.at("env").get<std::string>());
    t.seed = meta.at("seed").get<std::uint64_t>();
    t.episodes_per_arch = meta.at("episodes_per_arch").get<std::size_t>();
    for (const auto& r : doc.at("rows")) {
      RewardRow row{r.at("arch_index").get<std::size_t>(), r.at("mean_return").get<double>(),
                    r.at("return_std").get<double>(), r.at("episodes").get<std::size_t>()};
      if (row.arch_index >= kSpaceSize) throw std::out_of_range("arch_index out of range");
      if (row.episodes == 0) throw std::invalid_argument("row with zero episodes");
      t.rows.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("reward table: ") + e.what());
  }
  return t;
}

std::string table_to_csv(const RewardTable& t) {
  std::ostringstream out;
  out.precision(17);
  out << "arch_index,widths,depth,params,mean_return,return_std,episodes\n";
  const EnvSpec s = env_spec(t.env);
  for (const auto& r : t.rows) {
    const ArchSpec& spec = arch_at(r.arch_index);
    out << r.arch_index << ",\"" << format_arch(spec) << "\"," << spec.depth() << ','
        << param_count(spec, s.obs_dim, s.act_dim) << ',' << r.mean_return << ',' << r.return_std
        << ',' << r.episodes << '\n';
  }
  return out.str();
}

void save_table(const RewardTable& table, const std::string& json_path,
                const std::string& csv_path) {
  write_text(json_path, table_to_json(table));
  if (!csv_path.empty()) write_text(csv_path, table_to_csv(table));
}

RewardTable load_table(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open " + json_path);
  std::stringstream buf;
  buf << in.rdbuf();
  return table_from_json(buf.str());
}

// ---------------------------------------------------------------------------

Tensor ExportedPolicy::act(const TensorView& raw_obs) const {
  const std::size_t d = weights.obs_dim;
  if (raw_obs.cols() != d) throw std::invalid_argument("observation has the wrong width");
  Tensor obs({raw_obs.rows(), d});
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t j = i % d;
    obs[i] = std::clamp((raw_obs.data[i] - norm_mean[j]) / norm_std[j], -10.0, 10.0);
  }
  return policy_forward(weights, obs.view());
}

void export_policy(const GeneratedWeights& weights, const ObsNormalizer& normalizer,
                   const std::string& path) {
  validate(weights.spec);
  if (normalizer.dim() != weights.obs_dim) {
    throw std::invalid_argument("export: normalizer size does not match obs_dim");
  }
  ByteWriter w;
  w.put_bytes(kExportMagic);
  w.put(kExportVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.obs_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.act_dim));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(weights.spec.depth()));
  for (std::uint32_t width : weights.spec.widths) w.put(width);
  for (const auto& l : weights.layers) {
    w.put_f32(l.weight.data());
    w.put_f32(l.bias.data());
  }
  w.put_f32(normalizer.mean());
  w.put_f32(normalizer.stddev());
  write_file(path, w.bytes());
}

void export_policy(const Checkpoint& ckpt, const ArchSpec& spec, const std::string& path) {
  validate(spec);
  const auto model = make_model(ckpt);
  export_policy(model->generate_weights(spec), make_normalizer(ckpt), path);
}

ExportedPolicy import_policy(const std::string& path) {
  std::vector<char> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw ExportError(e.what());
  }
  ByteReader<ExportError> r(bytes, "policy file " + path);
  if (r.get_bytes(kExportMagic.size()) != kExportMagic) r.fail("bad magic (not a policy file)");
  const auto version = r.get<std::uint32_t>();
  if (version != kExportVersion) r.fail("unsupported version " + std::to_string(version));

  ExportedPolicy p;
  auto& w = p.weights;
  w.obs_dim = r.get<std::uint32_t>();
  w.act_dim = r.get<std::uint32_t>();
  const auto depth = r.get<std::uint32_t>();
  if (w.obs_dim == 0 || w.act_dim == 0 || depth > kMaxDepth) r.fail("bad header");
  for (std::uint32_t i = 0; i < depth; ++i) w.spec.widths.push_back(r.get<std::uint32_t>());
  if (!is_valid(w.spec)) r.fail("architecture outside the search space");

  std::size_t fan_in = w.obs_dim;
  for (std::size_t l = 0; l <= depth; ++l) {
    const std::size_t fan_out = l < depth ? w.spec.widths[l] : w.act_dim;
    LayerWeights lw;
    lw.weight = Tensor({fan_in, fan_out}, r.get_f32(fan_in * fan_out));
    lw.bias = Tensor({1, fan_out}, r.get_f32(fan_out));
    w.layers.push_back(std::move(lw));
    fan_in = fan_out;
  }
  p.norm_mean = r.get_f32(w.obs_dim);
  p.norm_std = r.get_f32(w.obs_dim);
  if (r.remaining() != 0) r.fail("trailing bytes");
  for (double s : p.norm_std) {
    if (!(s > 0.0)) r.fail("normalizer std must be positive");
  }
  return p;
}

// ---------------------------------------------------------------------------

CompareReport compare_small(const Checkpoint& ckpt, const Checkpoint& baseline_ckpt,
                            const ArchSpec& spec, EnvKind env, std::size_t episodes,
                            std::uint64_t seed) {
  validate(spec);
  if (episodes == 0) throw std::invalid_argument("compare: episodes must be >= 1");
  for (const Checkpoint* c : {&ckpt, &baseline_ckpt}) {
    if (c->kind == ModelKind::kBaseline && !(c->config.baseline_arch == spec)) {
      throw std::invalid_argument("compare: checkpoint was trained for " +
                                  format_arch(c->config.baseline_arch) + ", not " +
                                  format_arch(spec));
    }
  }
  const std::size_t a = arch_index(spec);
  std::vector<std::uint64_t> seeds(episodes);
  for (std::size_t e = 0; e < episodes; ++e) seeds[e] = sweep_episode_seed(seed, a, e);

  auto run = [&](const Checkpoint& c) {
    const auto model = make_model(c);
    check_env(*model, env);
    return return_stats(
        evaluate_policy(env, model->generate_weights(spec), make_normalizer(c), seeds));
  };
  CompareReport out;
  out.spec = spec;
  out.env = env;
  out.episodes = episodes;
  out.hyper = run(ckpt);
  out.baseline = run(baseline_ckpt);
  return out;
}

double improvement_ratio(double before, double after) {
  if (!std::isfinite(before) || !std::isfinite(after) || before == 0.0) {
    throw std::invalid_argument("improvement_ratio: needs finite returns and a non-zero baseline");
  }
  if (before > 0.0) return after / before;
  if (after >= 0.0) return std::numeric_limits<double>::infinity();
  return before / after;
}

}  // namespace hyperppo
