#include "hyperppo/archspace.hpp"

#include <algorithm>
#include <charconv>
#include <stdexcept>

namespace hyperppo {

namespace {

constexpr std::array<std::size_t, kMaxDepth + 1> kDepthOffset = {0, 0, 7, 56, 399};

std::vector<ArchSpec> build_space() {
  std::vector<ArchSpec> out;
  out.reserve(kSpaceSize);
  for (std::size_t depth = 1; depth <= kMaxDepth; ++depth) {
    std::vector<std::size_t> digits(depth, 0);
    while (true) {
      ArchSpec spec;
      for (std::size_t d : digits) spec.widths.push_back(kWidthAlphabet[d]);
      out.push_back(std::move(spec));
      // odometer increment, last position fastest
      std::size_t pos = depth;
      while (pos > 0 && ++digits[pos - 1] == kWidthAlphabet.size()) {
        digits[pos - 1] = 0;
        --pos;
      }
      if (pos == 0) break;
    }
  }
  return out;
}

}  // namespace

std::size_t width_symbol(std::uint32_t width) {
  const auto it = std::find(kWidthAlphabet.begin(), kWidthAlphabet.end(), width);
  if (it == kWidthAlphabet.end()) {
    throw std::invalid_argument("width " + std::to_string(width) + " is not in {4,...,256}");
  }
  return static_cast<std::size_t>(it - kWidthAlphabet.begin());
}

bool is_valid(const ArchSpec& spec) {
  if (spec.widths.empty() || spec.widths.size() > kMaxDepth) return false;
  return std::all_of(spec.widths.begin(), spec.widths.end(), [](std::uint32_t w) {
    return std::find(kWidthAlphabet.begin(), kWidthAlphabet.end(), w) != kWidthAlphabet.end();
  });
}

void validate(const ArchSpec& spec) {
  if (spec.widths.empty() || spec.widths.size() > kMaxDepth) {
    throw std::invalid_argument("architecture depth must be 1..4, got " +
                                std::to_string(spec.widths.size()));
  }
  for (auto w : spec.widths) width_symbol(w);
}

ArchSpec parse_arch(std::string_view text) {
  ArchSpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view tok = text.substr(start, end - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    std::uint32_t w = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), w);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw std::invalid_argument("bad architecture literal '" + std::string(text) + "'");
    }
    spec.widths.push_back(w);
    start = end + 1;
  }
  validate(spec);
  return spec;
}

std::string format_arch(const ArchSpec& spec) {
  std::string out;
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(spec.widths[i]);
  }
  return out;
}

const std::vector<ArchSpec>& enumerate_space() {
  static const std::vector<ArchSpec> space = build_space();
  return space;
}

std::size_t arch_index(const ArchSpec& spec) {
  validate(spec);
  std::size_t within = 0;
  for (auto w : spec.widths) within = within * kWidthAlphabet.size() + width_symbol(w);
  return kDepthOffset[spec.depth()] + within;
}

const ArchSpec& arch_at(std::size_t index) {
  const auto& space = enumerate_space();
  if (index >= space.size()) {
    throw std::out_of_range("architecture index " + std::to_string(index) + " out of range");
  }
  return space[index];
}

std::size_t param_count(const ArchSpec& spec, std::size_t obs_dim, std::size_t act_dim) {
  std::size_t total = 0;
  std::size_t fan_in = obs_dim;
  for (auto w : spec.widths) {
    total += fan_in * w + w;
    fan_in = w;
  }
  return total + fan_in * act_dim + act_dim;
}

SamplingMode parse_sampling_mode(std::string_view text) {
  if (text == "uniform") return SamplingMode::kUniform;
  if (text == "biased") return SamplingMode::kBiasedByDepth;
  throw std::invalid_argument("unknown architecture sampling mode '" + std::string(text) +
                              "' (expected uniform | biased)");
}

std::string_view sampling_mode_name(SamplingMode mode) {
  return mode == SamplingMode::kUniform ? "uniform" : "biased";
}

ArchDistribution::ArchDistribution(SamplingMode mode) : mode_(mode) {
  const auto& space = enumerate_space();
  probs_.resize(space.size());
  double z = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    probs_[i] = mode == SamplingMode::kUniform ? 1.0 : 1.0 / static_cast<double>(space[i].depth());
    z += probs_[i];
  }
  cdf_.resize(space.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    probs_[i] /= z;
    acc += probs_[i];
    cdf_[i] = acc;
  }
  cdf_.back() = 1.0;
}

std::size_t ArchDistribution::sample_index(Rng& rng) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

std::vector<std::size_t> ArchDistribution::sample_without_replacement(std::size_t count,
                                                                      Rng& rng) const {
  if (count > probs_.size()) throw std::invalid_argument("meta-batch larger than search space");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const std::size_t idx = sample_index(rng);
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

double sampling_prob(const ArchDistribution& dist, const ArchSpec& spec) { return dist.prob(spec); }

const ArchSpec& sample_arch(const ArchDistribution& dist, Rng& rng) { return dist.sample(rng); }

}  // namespace hyperppo
