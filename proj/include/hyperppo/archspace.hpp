#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hyperppo/random.hpp"

namespace hyperppo {

inline constexpr std::array<std::uint32_t, 7> kWidthAlphabet = {4, 8, 16, 32, 64, 128, 256};
inline constexpr std::size_t kMaxDepth = 4;
inline constexpr std::size_t kSpaceSize = 7 + 49 + 343 + 2401;

// Hidden-layer widths of an MLP, input to output.
struct ArchSpec {
  std::vector<std::uint32_t> widths;

  std::size_t depth() const { return widths.size(); }
  bool operator==(const ArchSpec&) const = default;
};

bool is_valid(const ArchSpec& spec);
void validate(const ArchSpec& spec);  // throws std::invalid_argument

// Position of `width` in kWidthAlphabet; throws if absent.
std::size_t width_symbol(std::uint32_t width);

// "256,256,256" <-> {256,256,256}
ArchSpec parse_arch(std::string_view text);
std::string format_arch(const ArchSpec& spec);

// All 2800 specs ordered by depth, then lexicographically by width symbol.
const std::vector<ArchSpec>& enumerate_space();
std::size_t arch_index(const ArchSpec& spec);
const ArchSpec& arch_at(std::size_t index);

// Trainable scalars of the MLP obs -> widths -> act (weights plus biases).
std::size_t param_count(const ArchSpec& spec, std::size_t obs_dim, std::size_t act_dim);

enum class SamplingMode { kUniform, kBiasedByDepth };

SamplingMode parse_sampling_mode(std::string_view text);
std::string_view sampling_mode_name(SamplingMode mode);

class ArchDistribution {
 public:
  explicit ArchDistribution(SamplingMode mode);

  SamplingMode mode() const { return mode_; }
  double prob(std::size_t index) const { return probs_.at(index); }
  double prob(const ArchSpec& spec) const { return prob(arch_index(spec)); }
  const std::vector<double>& probs() const { return probs_; }

  std::size_t sample_index(Rng& rng) const;
  const ArchSpec& sample(Rng& rng) const { return arch_at(sample_index(rng)); }

  // Distinct indices, drawn sequentially and re-drawing duplicates.
  std::vector<std::size_t> sample_without_replacement(std::size_t count, Rng& rng) const;

 private:
  SamplingMode mode_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

double sampling_prob(const ArchDistribution& dist, const ArchSpec& spec);
const ArchSpec& sample_arch(const ArchDistribution& dist, Rng& rng);

}  // namespace hyperppo
