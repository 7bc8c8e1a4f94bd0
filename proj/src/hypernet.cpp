#include "hyperppo/hypernet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hyperppo {

ArchGraph encode_arch(const ArchSpec& spec, std::size_t obs_dim, std::size_t act_dim) {
  validate(spec);
  if (obs_dim == 0 || act_dim == 0 || obs_dim > kSlabSize || act_dim > kSlabSize) {
    throw std::invalid_argument("obs_dim and act_dim must be in 1..256");
  }
  const std::size_t n = spec.depth() + 2;
  ArchGraph g;
  g.features = Tensor({n, kNodeFeatures});
  const std::size_t pos_col = kWidthAlphabet.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && i + 1 < n) g.features.at(i, width_symbol(spec.widths[i - 1])) = 1.0;
    g.features.at(i, pos_col) = static_cast<double>(i) / static_cast<double>(n - 1);
    g.features.at(i, pos_col + 1) = i == 0 ? 1.0 : 0.0;
    g.features.at(i, pos_col + 2) = i + 1 == n ? 1.0 : 0.0;
    if (i + 1 < n) g.edges.emplace_back(i, i + 1);
  }
  return g;
}

namespace {

std::string round_name(std::size_t r, const char* what) {
  return "mp" + std::to_string(r) + "." + what;
}

}  // namespace

HyperNet::HyperNet(const HyperNetConfig& config, std::uint64_t seed)
    : ActorCritic(config.obs_dim, config.act_dim), config_(config) {
  build_layout();
  Rng rng(seed);
  const double h = static_cast<double>(config_.hidden);
  init_normal(layout_.at("enc.w"), params_, 1.0, rng);
  for (std::size_t r = 0; r < config_.rounds; ++r) {
    for (const char* w : {"fwd_w", "bwd_w", "gate_self_w", "gate_msg_w"}) {
      init_normal(layout_.at(round_name(r, w)), params_, 1.0 / std::sqrt(h), rng);
    }
  }
  init_normal(layout_.at("edge.src_w"), params_, std::sqrt(1.5 / h), rng);
  init_normal(layout_.at("edge.dst_w"), params_, std::sqrt(1.5 / h), rng);
  // Edge codes are tanh outputs with E[c^2] around 0.4; decoded layers are
  // renormalized anyway, so this only sets the bias scale.
  const double slab_std = 1.0 / std::sqrt(0.4 * h);
  init_normal(layout_.at("slab.w"), params_, slab_std, rng);
  init_normal(layout_.at("bias.w"), params_, 0.1 * slab_std, rng);
  init_normal(layout_.at("emb.w"), params_, 1.0 / std::sqrt(h), rng);
  init_critic(rng);
}

HyperNet::HyperNet(const HyperNetConfig& config, std::vector<double> params)
    : ActorCritic(config.obs_dim, config.act_dim), config_(config) {
  build_layout();
  set_params(std::move(params));
}

void HyperNet::build_layout() {
  if (obs_dim_ > kSlabSize || act_dim_ > kSlabSize) {
    throw std::invalid_argument("obs_dim and act_dim are limited to 256");
  }
  if (config_.hidden == 0 || config_.embedding == 0) {
    throw std::invalid_argument("hypernetwork hidden and embedding sizes must be positive");
  }
  const std::size_t h = config_.hidden;
  layout_.add("enc.w", {kNodeFeatures, h});
  layout_.add("enc.b", {1, h});
  for (std::size_t r = 0; r < config_.rounds; ++r) {
    layout_.add(round_name(r, "fwd_w"), {h, h});
    layout_.add(round_name(r, "bwd_w"), {h, h});
    layout_.add(round_name(r, "msg_b"), {1, h});
    layout_.add(round_name(r, "gate_self_w"), {h, h});
    layout_.add(round_name(r, "gate_msg_w"), {h, h});
    layout_.add(round_name(r, "gate_b"), {1, h});
  }
  layout_.add("edge.src_w", {h, h});
  layout_.add("edge.dst_w", {h, h});
  layout_.add("edge.b", {1, h});
  // slab.w row i, column j*h + k: coefficient of edge-code unit k for weight (i, j)
  layout_.add("slab.w", {kSlabSize, kSlabSize * h});
  layout_.add("slab.b", {kSlabSize, kSlabSize});
  layout_.add("gain.w", {h, 1});
  layout_.add("gain.b", {1, 1});
  layout_.add("bias.w", {h, kSlabSize});
  layout_.add("bias.b", {1, kSlabSize});
  layout_.add("emb.w", {h, config_.embedding});
  layout_.add("emb.b", {1, config_.embedding});
  add_critic_params();
  finalize_layout();
}

ArchHeads HyperNet::build_arch(ParamScope& scope, const ArchSpec& spec, bool weights,
                               bool conditioning) const {
  Graph& g = scope.graph();
  const ArchGraph arch = encode_arch(spec, obs_dim_, act_dim_);
  const std::size_t n = arch.node_count();
  const std::size_t h = config_.hidden;

  NodeId state = g.tanh(g.broadcast_add(g.matmul(g.constant(arch.features), scope("enc.w")),
                                        scope("enc.b")));
  const NodeId zero_row = g.constant(Tensor({1, h}));
  for (std::size_t r = 0; r < config_.rounds; ++r) {
    // predecessor / successor states along the chain, zero at the ends
    const NodeId prev = g.concat(zero_row, g.slice(state, {0, n - 1}, {0, h}), 0);
    const NodeId next = g.concat(g.slice(state, {1, n}, {0, h}), zero_row, 0);
    const NodeId msg = g.tanh(g.broadcast_add(
        g.add(g.matmul(prev, scope(round_name(r, "fwd_w"))),
              g.matmul(next, scope(round_name(r, "bwd_w")))),
        scope(round_name(r, "msg_b"))));
    const NodeId gate_pre = g.broadcast_add(
        g.add(g.matmul(state, scope(round_name(r, "gate_self_w"))),
              g.matmul(msg, scope(round_name(r, "gate_msg_w")))),
        scope(round_name(r, "gate_b")));
    // sigmoid(x) = 0.5 tanh(x/2) + 0.5
    const NodeId gate = g.affine(g.tanh(g.affine(gate_pre, 0.5)), 0.5, 0.5);
    state = g.add(state, g.mul(gate, g.sub(msg, state)));
  }

  ArchHeads heads;
  if (weights) {
    for (const auto& [src, dst] : arch.edges) {
      const std::size_t fan_in = src == 0 ? obs_dim_ : spec.widths[src - 1];
      const std::size_t fan_out = dst + 1 == n ? act_dim_ : spec.widths[dst - 1];
      const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));

      const NodeId code = g.tanh(g.broadcast_add(
          g.add(g.matmul(g.slice(state, {src, src + 1}, {0, h}), scope("edge.src_w")),
                g.matmul(g.slice(state, {dst, dst + 1}, {0, h}), scope("edge.dst_w"))),
          scope("edge.b")));
      const NodeId code_col = g.reshape(code, {h, 1});

      const NodeId slab = g.reshape(
          g.slice(scope("slab.w"), {0, fan_in}, {0, fan_out * h}), {fan_in * fan_out, h});
      NodeId w = g.reshape(g.matmul(slab, code_col), {fan_in, fan_out});
      w = g.add(w, g.slice(scope("slab.b"), {0, fan_in}, {0, fan_out}));
      // Weight normalization: unit RMS times a learned per-edge gain,
      // exp(code . gain.w + gain.b), which starts at 1.
      const NodeId inv_rms =
          g.exp(g.affine(g.log(g.affine(g.mean(g.square(w)), 1.0, 1e-12)), -0.5));
      const NodeId gain = g.exp(g.add(g.matmul(code, scope("gain.w")), scope("gain.b")));
      w = g.affine(g.mul(g.mul(w, inv_rms), gain), scale);

      NodeId b = g.matmul(code, g.slice(scope("bias.w"), {0, h}, {0, fan_out}));
      b = g.add(b, g.slice(scope("bias.b"), {0, 1}, {0, fan_out}));
      b = g.affine(b, scale);
      heads.layers.push_back({w, b});
    }
  }
  if (conditioning) {
    const NodeId pool = g.constant(Tensor({1, n}, 1.0 / static_cast<double>(n)));
    heads.conditioning =
        g.tanh(g.add(g.matmul(g.matmul(pool, state), scope("emb.w")), scope("emb.b")));
  }
  return heads;
}

}  // namespace hyperppo
