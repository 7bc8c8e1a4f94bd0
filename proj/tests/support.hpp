#pragma once
// Independent oracles and hand-rolled generators shared by the test suites.
// Nothing here calls backward(); reference values are computed from first
// principles or by brute force.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include "hyperppo/archspace.hpp"
#include "hyperppo/graph.hpp"

namespace testsupport {

using hyperppo::Tensor;

// -------------------------------------------------------------- generators

struct Gen {
  explicit Gen(std::uint64_t seed) : rng(seed) {}
  std::mt19937_64 rng;

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
  std::size_t range(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  bool coin() { return index(2) == 1; }
  Tensor tensor(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Tensor t({r, c});
    for (auto& x : t.data()) x = uniform(lo, hi);
    return t;
  }
  std::vector<double> vec(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }
  hyperppo::ArchSpec arch() {
    hyperppo::ArchSpec s;
    const std::size_t depth = range(1, hyperppo::kMaxDepth);
    for (std::size_t i = 0; i < depth; ++i) {
      s.widths.push_back(hyperppo::kWidthAlphabet[index(hyperppo::kWidthAlphabet.size())]);
    }
    return s;
  }
};

// ------------------------------------------------------------------ oracles

// Central differences of a scalar function of one flat vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double up = f(x);
    x[i] = x0 - h;
    const double down = f(x);
    x[i] = x0;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

// A_t = sum_k (gamma*lambda)^k delta_{t+k}, summed directly; the series stops
// after the first done step (its delta uses no successor value).
inline std::vector<double> gae_direct(const std::vector<double>& r, const std::vector<double>& v,
                                      double bootstrap, const std::vector<std::uint8_t>& done,
                                      double gamma, double lambda) {
  const std::size_t T = r.size();
  std::vector<double> delta(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double next = done[t] ? 0.0 : (t + 1 < T ? v[t + 1] : bootstrap);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < T; ++k) {
      adv[t] += weight * delta[k];
      if (done[k]) break;
      weight *= gamma * lambda;
    }
  }
  return adv;
}

// Exhaustive selection: every satisfying row compared pairwise by
// (params, depth, widths).
struct OracleRow {
  std::size_t arch_index;
  double mean_return;
};

inline std::size_t select_oracle(const std::vector<OracleRow>& rows, double fraction,
                                 std::size_t obs, std::size_t act) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : rows) best = std::max(best, r.mean_return);
  const double threshold =
      best >= 0.0 ? fraction * best : best - (1.0 - fraction) * (-best);
  std::vector<std::size_t> ok;
  for (const auto& r : rows) {
    if (r.mean_return >= threshold) ok.push_back(r.arch_index);
  }
  auto key = [&](std::size_t a) {
    const auto& s = hyperppo::arch_at(a);
    std::size_t params = 0, fan_in = obs;
    for (auto w : s.widths) {
      params += fan_in * w + w;
      fan_in = w;
    }
    params += fan_in * act + act;
    return std::make_tuple(params, s.widths.size(), s.widths);
  };
  std::size_t winner = ok.front();
  for (std::size_t a : ok) {
    bool beats_all = true;
    for (std::size_t b : ok) {
      if (key(b) < key(a)) beats_all = false;
    }
    if (beats_all) {
      winner = a;
      break;
    }
  }
  return winner;
}

}  // namespace testsupport
