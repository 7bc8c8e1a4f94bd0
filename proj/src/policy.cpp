#include "hyperppo/policy.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace hyperppo {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

StdMode parse_std_mode(std::string_view text) {
  if (text == "csd") return StdMode::kCsd;
  if (text == "vsd") return StdMode::kVsd;
  throw std::invalid_argument("unknown std mode '" + std::string(text) + "' (expected csd | vsd)");
}

std::string_view std_mode_name(StdMode mode) { return mode == StdMode::kCsd ? "csd" : "vsd"; }

StdStore::StdStore(StdMode mode, std::size_t act_dim, AdamHyper hyper)
    : mode_(mode), act_dim_(act_dim), hyper_(hyper) {
  if (act_dim == 0) throw std::invalid_argument("act_dim must be >= 1");
  if (mode_ == StdMode::kCsd) {
    rows_.emplace(0, Row{std::vector<double>(act_dim_, kInitLogStd), AdamState(act_dim_, hyper_)});
  }
}

void StdStore::set_learning_rate(double lr) {
  hyper_.learning_rate = lr;
  for (auto& [k, row] : rows_) row.adam.hyper.learning_rate = lr;
}

std::size_t StdStore::key(std::size_t arch_index) const {
  if (arch_index >= kSpaceSize) {
    throw std::out_of_range("std store: architecture index " + std::to_string(arch_index) +
                            " out of range");
  }
  return mode_ == StdMode::kCsd ? 0 : arch_index;
}

std::vector<double> StdStore::log_std(std::size_t arch_index) const {
  const auto it = rows_.find(key(arch_index));
  if (it == rows_.end()) return std::vector<double>(act_dim_, kInitLogStd);
  return it->second.log_std;
}

std::vector<double> StdStore::get_std(std::size_t arch_index) const {
  auto out = log_std(arch_index);
  for (double& v : out) v = std::exp(v);
  return out;
}

void StdStore::update_row(Row& row, const std::vector<double>& grad) {
  if (grad.size() != act_dim_) throw std::invalid_argument("std gradient has the wrong length");
  adam_step(row.log_std, grad, row.adam);
  for (double& v : row.log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

void StdStore::apply_gradients(const std::map<std::size_t, std::vector<double>>& grads) {
  if (grads.empty()) return;
  if (mode_ == StdMode::kCsd) {
    std::vector<double> total(act_dim_, 0.0);
    for (const auto& [arch, g] : grads) {
      key(arch);
      if (g.size() != act_dim_) throw std::invalid_argument("std gradient has the wrong length");
      for (std::size_t j = 0; j < act_dim_; ++j) total[j] += g[j];
    }
    update_row(rows_.at(0), total);
    return;
  }
  for (const auto& [arch, g] : grads) {
    auto [it, fresh] = rows_.try_emplace(
        key(arch), Row{std::vector<double>(act_dim_, kInitLogStd), AdamState(act_dim_, hyper_)});
    update_row(it->second, g);
  }
}

void StdStore::restore_row(std::size_t k, Row row) {
  if (row.log_std.size() != act_dim_ || row.adam.m.size() != act_dim_ ||
      row.adam.v.size() != act_dim_) {
    throw std::invalid_argument("std row has the wrong length");
  }
  if (mode_ == StdMode::kCsd && k != 0) throw std::invalid_argument("CSD store has only row 0");
  key(k);
  rows_[k] = std::move(row);
}

void StdStore::round_to_float() {
  auto round = [](std::vector<double>& v) {
    for (double& x : v) x = static_cast<double>(static_cast<float>(x));
  };
  for (auto& [k, row] : rows_) {
    round(row.log_std);
    round(row.adam.m);
    round(row.adam.v);
  }
}

std::vector<double> get_std(const StdStore& store, std::size_t arch_index) {
  return store.get_std(arch_index);
}

Tensor policy_forward(const GeneratedWeights& weights, const TensorView& obs) {
  const std::size_t batch = obs.rows();
  if (obs.cols() != weights.obs_dim) {
    throw std::invalid_argument("policy_forward: observation width " + std::to_string(obs.cols()) +
                                " != obs_dim " + std::to_string(weights.obs_dim));
  }
  RowMat x = Eigen::Map<const RowMat>(obs.data.data(), batch, obs.cols());
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    const auto& lw = weights.layers[l];
    Eigen::Map<const RowMat> w(lw.weight.data().data(), lw.weight.rows(), lw.weight.cols());
    Eigen::Map<const Eigen::RowVectorXd> b(lw.bias.data().data(), lw.bias.size());
    RowMat y = x * w;
    y.rowwise() += b;
    if (l + 1 < weights.layers.size()) y = y.array().tanh();
    x = std::move(y);
  }
  Tensor out({batch, weights.act_dim});
  std::copy(x.data(), x.data() + x.size(), out.data().begin());
  return out;
}

NodeId policy_forward_graph(Graph& graph, const std::vector<LayerNodes>& layers, NodeId obs) {
  NodeId x = obs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    x = graph.broadcast_add(graph.matmul(x, layers[l].weight), layers[l].bias);
    if (l + 1 < layers.size()) x = graph.tanh(x);
  }
  return x;
}

std::vector<double> sample_action(std::span<const double> mean, std::span<const double> std,
                                  Rng& rng) {
  if (mean.size() != std.size()) throw std::invalid_argument("sample_action: size mismatch");
  std::vector<double> out(mean.size());
  for (std::size_t j = 0; j < mean.size(); ++j) out[j] = mean[j] + std[j] * standard_normal(rng);
  return out;
}

double log_prob(std::span<const double> mean, std::span<const double> std,
                std::span<const double> action) {
  if (mean.size() != std.size() || mean.size() != action.size()) {
    throw std::invalid_argument("log_prob: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double z = (action[j] - mean[j]) / std[j];
    acc += -0.5 * z * z - std::log(std[j]) - kHalfLog2Pi;
  }
  return acc;
}

NodeId log_prob_graph(Graph& graph, NodeId mean, NodeId log_std, NodeId actions,
                      std::size_t act_dim) {
  const NodeId z = graph.mul(graph.sub(actions, mean), graph.exp(graph.affine(log_std, -1.0)));
  const NodeId ones = graph.constant(Tensor({act_dim, 1}, 1.0));
  const NodeId quad = graph.matmul(graph.square(z), ones);  // B x 1
  const NodeId norm =
      graph.affine(graph.sum(log_std), 1.0, kHalfLog2Pi * static_cast<double>(act_dim));
  return graph.affine(graph.broadcast_add(graph.affine(quad, 0.5), norm), -1.0);
}

NodeId entropy_graph(Graph& graph, NodeId log_std, std::size_t act_dim) {
  return graph.affine(graph.sum(log_std), 1.0, (0.5 + kHalfLog2Pi) * static_cast<double>(act_dim));
}

}  // namespace hyperppo
