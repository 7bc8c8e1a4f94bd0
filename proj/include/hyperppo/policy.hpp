#pragma once

#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "hyperppo/adam.hpp"
#include "hyperppo/model.hpp"

namespace hyperppo {

inline constexpr double kInitLogStd = -0.5;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

enum class StdMode : std::uint32_t { kCsd = 0, kVsd = 1 };

StdMode parse_std_mode(std::string_view text);
std::string_view std_mode_name(StdMode mode);

// Exploration log-std: one common row (CSD) or one row per architecture
// (VSD). VSD rows are materialized on their first update and each carries its
// own Adam moments, so an update driven by architecture i moves only row i.
class StdStore {
 public:
  struct Row {
    std::vector<double> log_std;
    AdamState adam;
  };

  StdStore(StdMode mode, std::size_t act_dim, AdamHyper hyper);

  StdMode mode() const { return mode_; }
  std::size_t act_dim() const { return act_dim_; }
  const AdamHyper& hyper() const { return hyper_; }
  void set_learning_rate(double lr);

  std::vector<double> log_std(std::size_t arch_index) const;
  std::vector<double> get_std(std::size_t arch_index) const;

  // Gradients keyed by arch_index. CSD sums them into the common row.
  void apply_gradients(const std::map<std::size_t, std::vector<double>>& grads);

  // Materialized rows: key 0 holds the common row in CSD mode.
  const std::map<std::size_t, Row>& rows() const { return rows_; }
  void restore_row(std::size_t key, Row row);
  // Rounds stored values and moments to 32-bit precision.
  void round_to_float();

 private:
  std::size_t key(std::size_t arch_index) const;
  void update_row(Row& row, const std::vector<double>& grad);

  StdMode mode_;
  std::size_t act_dim_;
  AdamHyper hyper_;
  std::map<std::size_t, Row> rows_;
};

std::vector<double> get_std(const StdStore& store, std::size_t arch_index);

// Deterministic MLP: tanh hidden layers, identity output. obs is B x obs_dim
// (a rank-1 obs is one row); returns B x act_dim.
Tensor policy_forward(const GeneratedWeights& weights, const TensorView& obs);
NodeId policy_forward_graph(Graph& graph, const std::vector<LayerNodes>& layers, NodeId obs);

// mean + std * N(0, I)
std::vector<double> sample_action(std::span<const double> mean, std::span<const double> std,
                                  Rng& rng);

// Diagonal Gaussian log-density summed over action dimensions.
double log_prob(std::span<const double> mean, std::span<const double> std,
                std::span<const double> action);
// mean, actions: B x A; log_std: 1 x A. Returns B x 1.
NodeId log_prob_graph(Graph& graph, NodeId mean, NodeId log_std, NodeId actions,
                      std::size_t act_dim);
// Entropy of the diagonal Gaussian, 1 x 1.
NodeId entropy_graph(Graph& graph, NodeId log_std, std::size_t act_dim);

}  // namespace hyperppo
