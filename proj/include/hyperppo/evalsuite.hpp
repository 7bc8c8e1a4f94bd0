#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hyperppo/checkpoint.hpp"

namespace hyperppo {

struct RewardRow {
  std::size_t arch_index = 0;
  double mean_return = 0.0;
  double return_std = 0.0;  // population std over episodes
  std::size_t episodes = 0;
};

struct RewardTable {
  std::string checkpoint;  // identifier of the evaluated checkpoint
  EnvKind env = EnvKind::kPointMass;
  std::uint64_t seed = 0;
  std::size_t episodes_per_arch = 0;
  std::vector<RewardRow> rows;
};

struct SweepOptions {
  std::size_t episodes = 4;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::size_t>> subset;  // arch indices; all 2800 when absent
  std::string checkpoint_id;
};

// Episode seed of a sweep: a function of (sweep seed, arch, episode) only, so
// a row does not depend on which other architectures are swept.
std::uint64_t sweep_episode_seed(std::uint64_t seed, std::size_t arch_index, std::size_t episode);

// One generate_weights call per architecture, then deterministic episodes
// under the frozen normalizer. Rows follow the subset order.
RewardTable sweep(const ActorCritic& model, const ObsNormalizer& normalizer, EnvKind env,
                  const SweepOptions& options);
// Baseline checkpoints default to their single architecture.
RewardTable sweep(const Checkpoint& ckpt, EnvKind env, SweepOptions options);

double average_reward(const RewardTable& table);

struct Selection {
  std::size_t arch_index = 0;
  double mean_return = 0.0;
  std::size_t params = 0;
};

// Threshold for "at least `fraction` of the best return". For a negative best
// return the margin is taken on its magnitude (max - (1 - f)|max|), so the
// threshold never exceeds the max itself.
double selection_threshold(double max_return, double fraction);

// Minimum-parameter row among those reaching the threshold; ties go to fewer
// layers, then to lexicographically smaller widths.
Selection select(const RewardTable& table, double fraction, std::size_t obs_dim,
                 std::size_t act_dim);

struct SelectionReport {
  Selection best;
  Selection p90;
  Selection p80;
  std::optional<double> baseline_return;
};

SelectionReport selection_report(const RewardTable& table, std::size_t obs_dim,
                                 std::size_t act_dim,
                                 std::optional<double> baseline_return = std::nullopt);

// (x, number of rows with mean_return > x) for every grid point.
std::vector<std::pair<double, std::size_t>> reward_distribution(const RewardTable& table,
                                                                const std::vector<double>& grid);
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

std::string table_to_json(const RewardTable& table);
RewardTable table_from_json(const std::string& text);
std::string table_to_csv(const RewardTable& table);
void save_table(const RewardTable& table, const std::string& json_path,
                const std::string& csv_path);
RewardTable load_table(const std::string& json_path);

// ---------------------------------------------------------------------------
// Deployable policy file.

class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kExportVersion = 1;

struct ExportedPolicy {
  GeneratedWeights weights;
  std::vector<double> norm_mean;
  std::vector<double> norm_std;

  // Normalizes (clip to [-10, 10]) and runs the MLP; raw_obs is B x obs_dim.
  Tensor act(const TensorView& raw_obs) const;
};

void export_policy(const GeneratedWeights& weights, const ObsNormalizer& normalizer,
                   const std::string& path);
void export_policy(const Checkpoint& ckpt, const ArchSpec& spec, const std::string& path);
ExportedPolicy import_policy(const std::string& path);

// ---------------------------------------------------------------------------

struct ReturnStats {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

struct CompareReport {
  ArchSpec spec;
  EnvKind env = EnvKind::kPointMass;
  std::size_t episodes = 0;
  ReturnStats hyper;
  ReturnStats baseline;
};

// Same architecture, same episode seeds, each model under its own normalizer.
// Throws std::invalid_argument if a baseline checkpoint was trained for a
// different architecture or the env dimensions disagree.
CompareReport compare_small(const Checkpoint& ckpt, const Checkpoint& baseline_ckpt,
                            const ArchSpec& spec, EnvKind env, std::size_t episodes,
                            std::uint64_t seed = 0);

ReturnStats return_stats(std::vector<double> returns);

// How many times better `after` is than `before`. Positive baselines use
// after / before; negative ones use before / after (a return three times
// closer to zero counts as 3x), and reaching zero or above is unbounded.
double improvement_ratio(double before, double after);

}  // namespace hyperppo
