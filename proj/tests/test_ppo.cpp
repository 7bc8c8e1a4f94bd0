#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyperppo/hypernet.hpp"
#include "hyperppo/ppo.hpp"
#include "support.hpp"

using namespace hyperppo;
using testsupport::Gen;

TEST_CASE("GAE hand examples") {
  const std::vector<std::uint8_t> done1 = {1};
  const auto one = compute_gae(std::vector<double>{1.0}, std::vector<double>{0.0}, 5.0, done1, 0.99, 0.95);
  CHECK(one.advantages[0] == 1.0);  // bootstrap ignored at a terminal step
  CHECK(one.value_targets[0] == 1.0);

  const std::vector<std::uint8_t> open = {0, 0};
  const auto two = compute_gae(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}, 0.0, open,
                               0.99, 0.95);
  CHECK(two.advantages[1] == doctest::Approx(1.0));
  CHECK(two.advantages[0] == doctest::Approx(1.0 + 0.99 * 0.95).epsilon(1e-15));

  const std::vector<std::uint8_t> mid = {1, 0};
  const auto cut = compute_gae(std::vector<double>{2.0, 3.0}, std::vector<double>{0.5, 0.25}, 1.0, mid,
                               0.9, 0.8);
  CHECK(cut.advantages[0] == doctest::Approx(1.5));
  CHECK(cut.advantages[1] == doctest::Approx(3.0 + 0.9 - 0.25));
  CHECK(cut.value_targets[1] == doctest::Approx(3.9));

  CHECK_THROWS(compute_gae(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0}, 0.0, open, 0.9, 0.9));
  CHECK_THROWS(compute_gae(std::vector<double>{std::nan("")}, std::vector<double>{0.0}, 0.0, done1, 0.9, 0.9));
}

TEST_CASE("GAE recursion agrees with the direct discounted sum on random series") {
  Gen gen(21);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t T = gen.range(1, 64);
    const auto r = gen.vec(T, -2, 2), v = gen.vec(T, -3, 3);
    std::vector<std::uint8_t> done(T);
    for (auto& d : done) d = gen.uniform(0, 1) < 0.1;
    const double boot = gen.uniform(-3, 3), gamma = gen.uniform(0.8, 1.0), lambda = gen.uniform(0, 1);
    const auto got = compute_gae(r, v, boot, done, gamma, lambda);
    const auto want = testsupport::gae_direct(r, v, boot, done, gamma, lambda);
    for (std::size_t t = 0; t < T; ++t) {
      worst = std::max(worst, std::abs(got.advantages[t] - want[t]));
      REQUIRE(got.value_targets[t] == doctest::Approx(want[t] + v[t]).epsilon(1e-12));
    }
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("advantage normalization gives zero mean and unit std") {
  Gen gen(2);
  auto a = gen.vec(100, -5, 9);
  normalize_advantages(a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / 100;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var / 100 == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("ratio, clipped surrogate and value loss examples") {
  CHECK(importance_ratio(std::log(1.5), 0.0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(importance_ratio(-0.3, -0.3) == 1.0);
  CHECK(clipped_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(clipped_surrogate(0.5, 1.0, 0.2) == doctest::Approx(0.5));
  CHECK(clipped_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(clipped_surrogate(1.5, -1.0, 0.2) == doctest::Approx(-1.5));
  CHECK(value_loss(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0}) == 2.5);
  const auto rs = importance_ratio(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 0.0});
  CHECK(rs[1] == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("surrogate gradient vanishes outside the trust region and equals A inside") {
  struct Case { double ratio, adv, grad; };
  for (const auto& c : {Case{1.3, 1.0, 0.0}, Case{0.7, -1.0, 0.0}, Case{1.1, 1.0, 1.0},
                        Case{0.7, 1.0, 1.0}, Case{1.3, -2.0, -2.0}}) {
    Graph g;
    const NodeId r = g.input(), a = g.input();
    const NodeId s = g.sum(clipped_surrogate_graph(g, r, a, 0.2));
    const Tensor rt = Tensor::scalar(c.ratio), at = Tensor::scalar(c.adv);
    Evaluation e = forward(g, {{r, rt.view()}, {a, at.view()}});
    CHECK(e.scalar(s) == doctest::Approx(clipped_surrogate(c.ratio, c.adv, 0.2)));
    CHECK(backward(g, e, s).at(r)[0] == c.grad);
  }
}

namespace {

struct PpoFixture {
  HyperNet net{HyperNetConfig{6, 2, 16, 1, 4}, 5};
  StdStore stds{StdMode::kVsd, 2, AdamHyper{}};
  PpoConfig config;
  std::map<std::size_t, TrajectoryBatch> batches;
  std::map<std::size_t, AdvantageSet> advantages;

  explicit PpoFixture(std::vector<std::size_t> archs, std::size_t envs = 4, std::size_t T = 8) {
    stds.apply_gradients({{archs.back(), {0.3, -0.2}}});
    std::map<std::size_t, ActorSnapshot> policies;
    for (std::size_t a : archs) {
      ActorSnapshot s;
      s.weights = net.generate_weights(arch_at(a));
      s.std = stds.get_std(a);
      s.critic = std::make_shared<const CriticEvaluator>(net, net.conditioning(arch_at(a)));
      policies.emplace(a, std::move(s));
    }
    std::vector<EnvInstance> env;
    for (std::size_t e = 0; e < envs; ++e) {
      env.emplace_back(EnvKind::kPointMass, 50 + e);
      env.back().reset();
    }
    ObsNormalizer norm(6);
    batches = vec_rollout(env, partition_envs(envs, archs), policies, T, norm);
    for (const auto& [a, b] : batches) advantages.emplace(a, compute_advantages(b, 0.99, 0.95));
  }

  ArchMinibatch full(std::size_t arch) const {
    std::vector<std::size_t> rows(batches.at(arch).size());
    std::iota(rows.begin(), rows.end(), 0);
    return make_minibatch(batches.at(arch), advantages.at(arch), rows);
  }
};

}  // namespace

TEST_CASE("ratio is exactly one before the first update") {
  PpoFixture fx({3, 61});
  HyperPpoLoss loss(fx.net, fx.stds, {fx.full(3), fx.full(61)}, fx.config);
  const auto res = loss.evaluate(false);
  for (const auto& t : res.terms) {
    const auto& adv = fx.advantages.at(t.arch_index).advantages;
    const double mean_adv = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
    CHECK(t.surrogate == doctest::Approx(mean_adv).epsilon(1e-9));
  }
}

TEST_CASE("objective is invariant to minibatch order and additive over architectures") {
  PpoFixture fx({3, 61, 700}, 6);
  const auto ab = HyperPpoLoss(fx.net, fx.stds, {fx.full(3), fx.full(61), fx.full(700)}, fx.config)
                      .evaluate(false);
  const auto ba = HyperPpoLoss(fx.net, fx.stds, {fx.full(700), fx.full(3), fx.full(61)}, fx.config)
                      .evaluate(false);
  CHECK(std::abs(ab.loss - ba.loss) < 1e-9);

  // shuffled rows inside one architecture's minibatch
  Gen gen(4);
  std::vector<std::size_t> rows(fx.batches.at(61).size());
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), gen.rng);
  const auto shuffled = make_minibatch(fx.batches.at(61), fx.advantages.at(61), rows);
  const auto sh = HyperPpoLoss(fx.net, fx.stds, {fx.full(3), shuffled, fx.full(700)}, fx.config)
                      .evaluate(false);
  CHECK(std::abs(ab.loss - sh.loss) < 1e-9);

  double sum = 0.0;
  for (std::size_t a : {3u, 61u, 700u}) {
    sum += HyperPpoLoss(fx.net, fx.stds, {fx.full(a)}, fx.config).evaluate(false).loss;
  }
  CHECK(std::abs(ab.loss - sum / 3.0) < 1e-9);
}

TEST_CASE("rows from another architecture are rejected") {
  PpoFixture fx({3, 61});
  const std::vector<std::size_t> rows = {0, 1, 2};
  CHECK_THROWS_AS(make_minibatch(fx.batches.at(3), fx.advantages.at(61), rows), NoMixingError);
  auto tampered = fx.full(3);
  tampered.sample_arch[1] = 61;
  CHECK_THROWS_AS(HyperPpoLoss(fx.net, fx.stds, {tampered, fx.full(61)}, fx.config), NoMixingError);
  CHECK_THROWS(HyperPpoLoss(fx.net, fx.stds, {fx.full(3), fx.full(3)}, fx.config));
  for (const auto& [a, b] : fx.batches) {
    for (std::size_t e : b.env_ids) CHECK(partition_envs(4, {3, 61})[e] == a);
  }
}

TEST_CASE("end-to-end PPO gradient matches finite differences") {
  PpoFixture fx({3, 61});
  HyperPpoLoss loss(fx.net, fx.stds, {fx.full(3), fx.full(61)}, fx.config);
  const auto res = loss.evaluate(true);
  REQUIRE(res.param_grad.size() == fx.net.layout().total());

  Gen gen(31);
  const auto& slab = fx.net.layout().at("slab.w");
  std::vector<std::size_t> probe;
  while (probe.size() < 25) {
    const std::size_t k = gen.index(fx.net.layout().total());
    if (k < slab.offset || k >= slab.offset + slab.size()) probe.push_back(k);
  }
  while (probe.size() < 50) {
    const std::size_t row = gen.index(6), col = gen.index(16 * 16);
    probe.push_back(slab.offset + row * slab.shape[1] + col);
  }
  double worst = 0.0;
  for (std::size_t k : probe) {
    const double x0 = fx.net.params()[k];
    fx.net.params()[k] = x0 + 1e-6;
    const double up = loss.evaluate(false).loss;
    fx.net.params()[k] = x0 - 1e-6;
    const double down = loss.evaluate(false).loss;
    fx.net.params()[k] = x0;
    worst = std::max(worst, testsupport::rel_error(res.param_grad[k], (up - down) / 2e-6));
  }
  CHECK(worst < 1e-4);

  // log-std gradient: rebuild with a perturbed store row
  for (std::size_t j = 0; j < 2; ++j) {
    auto shifted = [&](double h) {
      StdStore s = fx.stds;
      auto row = s.rows().at(61);
      row.log_std[j] += h;
      s.restore_row(61, row);
      return HyperPpoLoss(fx.net, s, {fx.full(3), fx.full(61)}, fx.config).evaluate(false).loss;
    };
    const double num = (shifted(1e-6) - shifted(-1e-6)) / 2e-6;
    CHECK(testsupport::rel_error(res.log_std_grad.at(61)[j], num) < 1e-6);
  }
}

TEST_CASE("non-finite objective raises") {
  PpoFixture fx({3});
  auto mb = fx.full(3);
  mb.advantages[0] = std::numeric_limits<double>::infinity();
  HyperPpoLoss loss(fx.net, fx.stds, {mb}, fx.config);
  CHECK_THROWS_AS(loss.evaluate(true), NonFiniteLossError);
}

TEST_CASE("return scaler divides by the pooled std of discounted returns") {
  Gen gen(6);
  const double gamma = 0.9;
  const std::size_t envs = 3, T = 5;
  ReturnScaler scaler(envs, gamma);
  std::map<std::size_t, TrajectoryBatch> batches;
  for (std::size_t a : {0u, 1u}) {
    TrajectoryBatch b;
    b.arch_index = a;
    b.horizon = T;
    b.env_ids = a == 0 ? std::vector<std::size_t>{0, 2} : std::vector<std::size_t>{1};
    b.rewards = gen.vec(b.env_ids.size() * T, -30, 5);
    b.dones.assign(b.rewards.size(), 0);
    b.dones[2] = 1;
    batches.emplace(a, std::move(b));
  }
  const auto raw = batches;
  scaler.apply(batches);

  // oracle: keep every return vector and pool with the unit-variance prior
  std::vector<double> ret(envs, 0.0), seen;
  for (std::size_t t = 0; t < T; ++t) {
    for (const auto& [a, b] : raw) {
      for (std::size_t i = 0; i < b.env_ids.size(); ++i) ret[b.env_ids[i]] = ret[b.env_ids[i]] * gamma + b.rewards[i * T + t];
    }
    seen.insert(seen.end(), ret.begin(), ret.end());
    const double n = seen.size() + 1e-4;
    const double mean = std::accumulate(seen.begin(), seen.end(), 0.0) / n;
    double m2 = 1e-4 * (1.0 + mean * mean);
    for (double x : seen) m2 += (x - mean) * (x - mean);
    const double s = std::sqrt(m2 / n + 1e-8);
    for (const auto& [a, b] : raw) {
      for (std::size_t i = 0; i < b.env_ids.size(); ++i) {
        const std::size_t row = i * T + t;
        CHECK(batches.at(a).rewards[row] ==
              doctest::Approx(std::clamp(b.rewards[row] / s, -10.0, 10.0)).epsilon(1e-9));
        if (b.dones[row]) ret[b.env_ids[i]] = 0.0;
      }
    }
  }
  for (std::size_t e = 0; e < envs; ++e) CHECK(scaler.returns()[e] == doctest::Approx(ret[e]));
}
