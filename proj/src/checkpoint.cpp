#include "hyperppo/checkpoint.hpp"

#include <json.hpp>

#include "hyperppo/baseline.hpp"
#include "hyperppo/binary_io.hpp"
#include "hyperppo/hypernet.hpp"

namespace hyperppo {

namespace {

constexpr std::string_view kMagic = "HPPO";
constexpr std::string_view kEndMarker = "ENDC";
constexpr std::size_t kMaxRank = 8;

using Reader = ByteReader<CheckpointError>;

void put_adam(ByteWriter& w, const AdamState& a) {
  w.put<std::uint64_t>(a.step);
  w.put(a.hyper.learning_rate);
  w.put(a.hyper.beta1);
  w.put(a.hyper.beta2);
  w.put(a.hyper.epsilon);
  w.put_f32(a.m);
  w.put_f32(a.v);
}

AdamState get_adam(Reader& r, std::size_t n) {
  AdamState a;
  a.step = r.get<std::uint64_t>();
  a.hyper.learning_rate = r.get<double>();
  a.hyper.beta1 = r.get<double>();
  a.hyper.beta2 = r.get<double>();
  a.hyper.epsilon = r.get<double>();
  a.m = r.get_f32(n);
  a.v = r.get_f32(n);
  return a;
}

bool same_adam(const AdamState& a, const AdamState& b) {
  return a.step == b.step && a.m == b.m && a.v == b.v &&
         a.hyper.learning_rate == b.hyper.learning_rate && a.hyper.beta1 == b.hyper.beta1 &&
         a.hyper.beta2 == b.hyper.beta2 && a.hyper.epsilon == b.hyper.epsilon;
}

}  // namespace

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  if (config_to_ini(a.config) != config_to_ini(b.config) || a.kind != b.kind ||
      !(a.layout == b.layout) || a.params != b.params || !same_adam(a.adam, b.adam) ||
      a.trainer_rng != b.trainer_rng || a.norm_count != b.norm_count ||
      a.norm_mean != b.norm_mean || a.norm_var != b.norm_var || a.envs != b.envs ||
      a.env_returns != b.env_returns || a.ret_count != b.ret_count ||
      a.ret_mean != b.ret_mean || a.ret_var != b.ret_var ||
      a.iteration != b.iteration || a.env_steps != b.env_steps) {
    return false;
  }
  if (a.stds.mode() != b.stds.mode() || a.stds.act_dim() != b.stds.act_dim() ||
      a.stds.rows().size() != b.stds.rows().size()) {
    return false;
  }
  for (const auto& [key, row] : a.stds.rows()) {
    const auto it = b.stds.rows().find(key);
    if (it == b.stds.rows().end() || it->second.log_std != row.log_std ||
        !same_adam(it->second.adam, row.adam)) {
      return false;
    }
  }
  return true;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  if (c.params.size() != c.layout.total() || c.adam.m.size() != c.params.size() ||
      c.adam.v.size() != c.params.size()) {
    throw CheckpointError("checkpoint: parameter and optimizer sizes disagree with the layout");
  }
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put(kCheckpointVersion);

  const nlohmann::json meta = {
      {"mode", train_mode_name(c.config.mode)},
      {"env", env_name(c.config.env)},
      {"model_kind", static_cast<std::uint32_t>(c.kind)},
      {"config", config_to_ini(c.config)},
  };
  w.put_string(meta.dump());

  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.layout.entries().size()));
  for (const auto& e : c.layout.entries()) {
    w.put_string(e.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.put<std::uint64_t>(d);
    w.put<std::uint64_t>(e.offset);
  }
  w.put<std::uint64_t>(c.params.size());
  w.put_f32(c.params);
  put_adam(w, c.adam);

  const auto& s = c.stds;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.mode()));
  w.put<std::uint64_t>(s.act_dim());
  w.put(s.hyper().learning_rate);
  w.put(s.hyper().beta1);
  w.put(s.hyper().beta2);
  w.put(s.hyper().epsilon);
  w.put<std::uint64_t>(s.rows().size());
  for (const auto& [key, row] : s.rows()) {
    w.put<std::uint64_t>(key);
    w.put_f32(row.log_std);
    put_adam(w, row.adam);
  }

  w.put_string(c.trainer_rng);
  w.put(c.norm_count);
  w.put<std::uint64_t>(c.norm_mean.size());
  w.put_f64(c.norm_mean);
  w.put_f64(c.norm_var);
  w.put<std::uint64_t>(c.envs.size());
  for (const auto& e : c.envs) {
    w.put<std::uint64_t>(e.steps);
    w.put<std::uint64_t>(e.state.size());
    w.put_f64(e.state);
    w.put_string(e.rng);
  }
  w.put<std::uint64_t>(c.env_returns.size());
  w.put_f64(c.env_returns);
  w.put(c.ret_count);
  w.put(c.ret_mean);
  w.put(c.ret_var);
  w.put<std::uint64_t>(c.iteration);
  w.put<std::uint64_t>(c.env_steps);
  w.put_bytes(kEndMarker);
  write_file(path, w.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::vector<char> bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
  Reader r(bytes, "checkpoint " + path);
  if (r.get_bytes(kMagic.size()) != kMagic) r.fail("bad magic (not a checkpoint)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));

  Checkpoint c;
  try {
    const auto meta = nlohmann::json::parse(r.get_string());
    c.config = parse_config(meta.at("config").get<std::string>());
    c.kind = static_cast<ModelKind>(meta.at("model_kind").get<std::uint32_t>());
  } catch (const std::exception& e) {
    r.fail(std::string("bad metadata: ") + e.what());
  }
  if (c.kind != ModelKind::kHyper && c.kind != ModelKind::kBaseline) r.fail("unknown model kind");

  const auto n_entries = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    std::string name = r.get_string(4096);
    const auto rank = r.get<std::uint32_t>();
    if (rank > kMaxRank) r.fail("tensor rank out of range");
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const auto offset = r.get<std::uint64_t>();
    const auto& e = c.layout.add(std::move(name), std::move(shape));
    if (e.offset != offset) r.fail("layout offsets are not contiguous");
  }
  const auto n = r.get<std::uint64_t>();
  if (n != c.layout.total()) r.fail("parameter count does not match the layout");
  c.params = r.get_f32(n);
  c.adam = get_adam(r, n);

  const auto mode = r.get<std::uint32_t>();
  if (mode > 1) r.fail("unknown std mode");
  const auto act_dim = r.get<std::uint64_t>();
  if (act_dim == 0 || act_dim > 256) r.fail("action dimension out of range");
  AdamHyper hyper;
  hyper.learning_rate = r.get<double>();
  hyper.beta1 = r.get<double>();
  hyper.beta2 = r.get<double>();
  hyper.epsilon = r.get<double>();
  c.stds = StdStore(static_cast<StdMode>(mode), act_dim, hyper);
  const auto n_rows = r.get<std::uint64_t>();
  if (n_rows > kSpaceSize) r.fail("too many std rows");
  for (std::uint64_t i = 0; i < n_rows; ++i) {
    const auto key = r.get<std::uint64_t>();
    StdStore::Row row;
    row.log_std = r.get_f32(act_dim);
    row.adam = get_adam(r, act_dim);
    try {
      c.stds.restore_row(key, std::move(row));
    } catch (const std::exception& e) {
      r.fail(e.what());
    }
  }

  c.trainer_rng = r.get_string();
  c.norm_count = r.get<double>();
  const auto od = r.get<std::uint64_t>();
  c.norm_mean = r.get_f64(od);
  c.norm_var = r.get_f64(od);
  const auto n_envs = r.get<std::uint64_t>();
  if (n_envs > r.remaining()) r.fail("truncated file");
  c.envs.resize(n_envs);
  for (auto& e : c.envs) {
    e.steps = r.get<std::uint64_t>();
    e.state = r.get_f64(r.get<std::uint64_t>());
    e.rng = r.get_string();
  }
  c.env_returns = r.get_f64(r.get<std::uint64_t>());
  c.ret_count = r.get<double>();
  c.ret_mean = r.get<double>();
  c.ret_var = r.get<double>();
  c.iteration = r.get<std::uint64_t>();
  c.env_steps = r.get<std::uint64_t>();
  if (r.get_bytes(kEndMarker.size()) != kEndMarker) r.fail("missing end marker");
  if (r.remaining() != 0) r.fail("trailing bytes after end marker");

  // The stored layout must be the one the config produces.
  try {
    if (!(make_model(c)->layout() == c.layout)) r.fail("layout does not match the configuration");
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    r.fail(e.what());
  }
  return c;
}

std::unique_ptr<ActorCritic> make_model(const Checkpoint& c) {
  const EnvSpec s = env_spec(c.config.env);
  if (c.kind == ModelKind::kHyper) {
    return std::make_unique<HyperNet>(c.config.hypernet(), c.params);
  }
  return std::make_unique<DirectPolicy>(c.config.baseline_arch, s.obs_dim, s.act_dim, c.params);
}

ObsNormalizer make_normalizer(const Checkpoint& c) {
  ObsNormalizer n(c.norm_mean.size());
  n.restore(c.norm_count, c.norm_mean, c.norm_var);
  return n;
}

}  // namespace hyperppo
