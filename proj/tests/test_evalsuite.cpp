#include <doctest.h>

#include <filesystem>

#include "hyperppo/binary_io.hpp"
#include "hyperppo/evalsuite.hpp"
#include "hyperppo/hypernet.hpp"
#include "hyperppo/trainer.hpp"
#include "support.hpp"

using namespace hyperppo;
using testsupport::Gen;
namespace fs = std::filesystem;

namespace {

RewardTable table_of(const std::vector<std::pair<std::string, double>>& rows) {
  RewardTable t;
  for (const auto& [arch, ret] : rows) t.rows.push_back({arch_index(parse_arch(arch)), ret, 0.0, 1});
  return t;
}

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "hyperppo_tests";
  fs::create_directories(dir);
  return dir / name;
}

TrainConfig tiny() {
  TrainConfig c;
  c.num_envs = 4;
  c.rollout_length = 16;
  c.meta_batch = 2;
  c.budget = 64;
  c.eval_every = 0;
  c.hyper_hidden = 8;
  c.hyper_rounds = 1;
  c.hyper_embedding = 4;
  c.ppo.minibatch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("selection threshold for positive and negative maxima") {
  CHECK(selection_threshold(100.0, 0.9) == doctest::Approx(90.0));
  CHECK(selection_threshold(-100.0, 0.9) == doctest::Approx(-110.0));
  CHECK(selection_threshold(0.0, 0.8) == 0.0);
}

TEST_CASE("select: smallest qualifying network with documented tie-breaks") {
  // params on PointMass (obs 6, act 2): [4] = 38, [8] = 74, [4,4] = 58
  const auto t = table_of({{"4", 80.0}, {"8", 100.0}, {"4,4", 95.0}});
  CHECK(format_arch(arch_at(select(t, 0.9, 6, 2).arch_index)) == "4,4");
  CHECK(format_arch(arch_at(select(t, 0.8, 6, 2).arch_index)) == "4");
  CHECK(format_arch(arch_at(select(t, 1.0, 6, 2).arch_index)) == "8");
  CHECK(select(t, 0.8, 6, 2).params == 38);

  const auto neg = table_of({{"4", -120.0}, {"8", -100.0}, {"16", -105.0}});
  CHECK(format_arch(arch_at(select(neg, 0.8, 6, 2).arch_index)) == "4");
  CHECK(format_arch(arch_at(select(neg, 0.9, 6, 2).arch_index)) == "8");

  const auto report = selection_report(t, 6, 2, 50.0);
  CHECK(report.best.mean_return == 100.0);
  CHECK(report.p80.params == 38);
  CHECK(report.baseline_return == 50.0);
  CHECK_THROWS(select(RewardTable{}, 0.9, 6, 2));
}

TEST_CASE("select agrees with an exhaustive oracle on random tables") {
  Gen gen(77);
  for (int trial = 0; trial < 1000; ++trial) {
    RewardTable t;
    std::vector<testsupport::OracleRow> oracle;
    const std::size_t n = gen.range(1, 40);
    const double shift = gen.coin() ? 0.0 : -300.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = gen.index(kSpaceSize);
      // coarse returns so ties in return are common
      const double r = shift + std::round(gen.uniform(0, 20)) * 10.0;
      t.rows.push_back({a, r, 0.0, 1});
      oracle.push_back({a, r});
    }
    for (double f : {0.8, 0.9, 1.0}) {
      REQUIRE(select(t, f, 6, 2).arch_index == testsupport::select_oracle(oracle, f, 6, 2));
    }
    const auto dist = reward_distribution(t, linear_grid(shift - 10, shift + 210, 23));
    for (std::size_t i = 1; i < dist.size(); ++i) REQUIRE(dist[i].second <= dist[i - 1].second);
  }
}

TEST_CASE("reward distribution is a non-increasing count of rows above x") {
  Gen gen(3);
  RewardTable t;
  for (int i = 0; i < 200; ++i) t.rows.push_back({std::size_t(i), gen.uniform(-50, 50), 0.0, 1});
  const auto dist = reward_distribution(t, linear_grid(-60, 60, 25));
  REQUIRE(dist.size() == 25);
  CHECK(dist.front().second == 200);
  CHECK(dist.back().second == 0);
  for (std::size_t i = 1; i < dist.size(); ++i) CHECK(dist[i].second <= dist[i - 1].second);
  CHECK(reward_distribution(table_of({{"4", 1.0}}), {1.0})[0].second == 0);
  CHECK_THROWS(reward_distribution(t, {1.0, 0.0}));
  CHECK(linear_grid(0, 1, 3) == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("average reward and table serialization") {
  auto t = table_of({{"4", 1.0}, {"8,8", 3.0}});
  t.checkpoint = "abc";
  t.seed = 9;
  t.episodes_per_arch = 1;
  CHECK(average_reward(t) == 2.0);
  CHECK_THROWS(average_reward(RewardTable{}));

  const auto back = table_from_json(table_to_json(t));
  CHECK(back.checkpoint == "abc");
  CHECK(back.seed == 9);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[1].arch_index == t.rows[1].arch_index);
  CHECK(back.rows[1].mean_return == 3.0);

  const auto csv = table_to_csv(t);
  CHECK(csv.rfind("arch_index,widths,depth,params,mean_return,return_std,episodes\n", 0) == 0);
  CHECK(csv.find("\"8,8\"") != std::string::npos);
  save_table(t, temp_path("t.json").string(), temp_path("t.csv").string());
  CHECK(load_table(temp_path("t.json").string()).rows.size() == 2);
}

TEST_CASE("sweep: one generation per architecture, subset order, seed isolation") {
  HyperNet net(HyperNetConfig{6, 2, 8, 1, 4}, 2);
  ObsNormalizer norm(6);
  SweepOptions opts;
  opts.episodes = 2;
  opts.seed = 5;
  opts.subset = std::vector<std::size_t>{900, 3, 41};
  const auto before = net.generate_calls();
  const auto t = sweep(net, norm, EnvKind::kPointMass, opts);
  CHECK(net.generate_calls() - before == 3);
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].arch_index == 900);
  CHECK(t.rows[2].arch_index == 41);
  CHECK(t.rows[0].episodes == 2);

  opts.subset = std::vector<std::size_t>{41};
  const auto alone = sweep(net, norm, EnvKind::kPointMass, opts);
  CHECK(alone.rows[0].mean_return == t.rows[2].mean_return);

  const auto w = net.generate_weights(arch_at(41));
  const std::vector<std::uint64_t> seeds = {sweep_episode_seed(5, 41, 0), sweep_episode_seed(5, 41, 1)};
  const auto r = evaluate_policy(EnvKind::kPointMass, w, norm, seeds);
  CHECK(alone.rows[0].mean_return == (r[0] + r[1]) / 2);
  CHECK(sweep_episode_seed(5, 41, 0) != sweep_episode_seed(5, 42, 0));
}

TEST_CASE("export: payload size, round trip and corruption") {
  HyperNet net(HyperNetConfig{6, 2, 8, 1, 4}, 2);
  ObsNormalizer norm(6);
  Gen gen(1);
  std::vector<double> batch;
  for (int i = 0; i < 60; ++i) batch.push_back(gen.uniform(-3, 3));
  norm.update(batch, 10);

  const auto w = net.generate_weights(ArchSpec{{4}});
  CHECK(w.scalar_count() == 38);
  const auto path = temp_path("p.hpol").string();
  export_policy(w, norm, path);
  const auto bytes = read_file(path);
  // header: magic, version, obs, act, depth, one width; then 38 + 12 floats
  CHECK(bytes.size() == 4 + 4 + 4 * 4 + (38 + 12) * 4);

  const auto p = import_policy(path);
  CHECK(p.norm_mean.size() == 6);
  const Tensor raw = gen.tensor(20, 6, -4, 4);
  Tensor normed({20, 6});
  for (std::size_t r = 0; r < 20; ++r) {
    norm.normalize_into(std::span<const double>(raw.storage()).subspan(r * 6, 6),
                        std::span<double>(normed.storage()).subspan(r * 6, 6));
  }
  const Tensor want = policy_forward(w, normed.view());
  const Tensor got = p.act(raw.view());
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) < 1e-6);

  auto bad = bytes;
  bad[1] = '?';
  write_file(temp_path("bad.hpol").string(), bad);
  CHECK_THROWS_AS(import_policy(temp_path("bad.hpol").string()), ExportError);
  bad = bytes;
  bad.pop_back();
  write_file(temp_path("short.hpol").string(), bad);
  CHECK_THROWS_AS(import_policy(temp_path("short.hpol").string()), ExportError);
}

TEST_CASE("compare_small: identical checkpoints give identical statistics") {
  Trainer t(tiny());
  t.run();
  const auto ckpt = t.checkpoint();
  const ArchSpec spec{{16, 16}};
  const auto rep = compare_small(ckpt, ckpt, spec, EnvKind::kPointMass, 3, 4);
  CHECK(rep.spec == spec);
  CHECK(rep.episodes == 3);
  CHECK(rep.hyper.returns.size() == 3);
  CHECK(rep.hyper.returns == rep.baseline.returns);
  CHECK(rep.hyper.mean == rep.baseline.mean);

  auto base_cfg = tiny();
  base_cfg.mode = TrainMode::kBaseline;
  base_cfg.baseline_arch = ArchSpec{{8}};
  Trainer b(base_cfg);
  b.run();
  CHECK_THROWS_AS(compare_small(ckpt, b.checkpoint(), spec, EnvKind::kPointMass, 2), std::invalid_argument);
  const auto ok = compare_small(ckpt, b.checkpoint(), ArchSpec{{8}}, EnvKind::kPointMass, 2);
  CHECK(ok.baseline.returns.size() == 2);

  const auto s = return_stats({1.0, 3.0});
  CHECK(s.mean == 2.0);
  CHECK(s.std == 1.0);
}

TEST_CASE("improvement ratio for positive and negative returns") {
  CHECK(improvement_ratio(10.0, 35.0) == 3.5);
  CHECK(improvement_ratio(-600.0, -200.0) == 3.0);
  CHECK(improvement_ratio(-600.0, -900.0) == doctest::Approx(2.0 / 3.0));
  CHECK(improvement_ratio(-5.0, 1.0) == std::numeric_limits<double>::infinity());
  CHECK_THROWS(improvement_ratio(0.0, 1.0));
}
