#include <doctest.h>

#include <cmath>

#include "hyperppo/adam.hpp"
#include "hyperppo/grad_check.hpp"
#include "hyperppo/graph.hpp"
#include "hyperppo/random.hpp"
#include "support.hpp"

using namespace hyperppo;
using testsupport::Gen;

namespace {

using Builder = std::function<NodeId(Graph&, const std::vector<NodeId>&)>;

// loss = sum(out * W) for a fixed random W; compares backward() against
// central differences for every entry of every input.
double op_gradient_error(const std::vector<Tensor>& inputs, const Builder& build, Gen& gen) {
  Graph g;
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < inputs.size(); ++i) ids.push_back(g.input("x" + std::to_string(i)));
  const NodeId out = build(g, ids);
  Bindings b0;
  for (std::size_t i = 0; i < inputs.size(); ++i) b0[ids[i]] = inputs[i].view();
  const auto shape = forward(g, b0).value(out).shape;
  Tensor w(shape);
  for (auto& x : w.data()) x = gen.uniform(-1.0, 1.0);
  const NodeId loss = g.sum(g.mul(out, g.constant(w)));

  Evaluation eval = forward(g, b0);
  const Gradients grads = backward(g, eval, loss);

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&](const std::vector<double>& flat) {
      std::vector<Tensor> probe = inputs;
      probe[i] = Tensor(inputs[i].shape(), flat);
      Bindings b;
      for (std::size_t k = 0; k < probe.size(); ++k) b[ids[k]] = probe[k].view();
      return forward(g, b).scalar(loss);
    };
    const auto num = testsupport::numeric_gradient(f, inputs[i].storage(), 1e-6);
    const auto& ana = grads.at(ids[i]);
    for (std::size_t j = 0; j < num.size(); ++j) {
      worst = std::max(worst, testsupport::rel_error(ana[j], num[j]));
    }
  }
  return worst;
}

// Keeps x at least `gap` away from every value in `avoid`.
double away_from(double x, std::initializer_list<double> avoid, double gap) {
  for (double a : avoid) {
    if (std::abs(x - a) < gap) x = a + (x >= a ? gap : -gap);
  }
  return x;
}

}  // namespace

TEST_CASE("every primitive op matches finite differences on 100 random instances") {
  Gen gen(7);
  constexpr int kInstances = 100;
  constexpr double kTol = 1e-6;
  auto dims = [&] { return std::make_pair(gen.range(1, 5), gen.range(1, 5)); };

  SUBCASE("matmul") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, k] = dims();
      const std::size_t c = gen.range(1, 5);
      CHECK(op_gradient_error({gen.tensor(r, k), gen.tensor(k, c)},
                              [](Graph& g, auto& x) { return g.matmul(x[0], x[1]); }, gen) < kTol);
    }
  }
  SUBCASE("add / broadcast_add") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, c] = dims();
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(r, c)},
                              [](Graph& g, auto& x) { return g.add(x[0], x[1]); }, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(1, c)},
                              [](Graph& g, auto& x) { return g.broadcast_add(x[0], x[1]); },
                              gen) < kTol);
    }
  }
  SUBCASE("mul with every broadcast form") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, c] = dims();
      auto mul = [](Graph& g, auto& x) { return g.mul(x[0], x[1]); };
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(r, c)}, mul, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(1, c)}, mul, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(r, 1)}, mul, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(1, 1)}, mul, gen) < kTol);
    }
  }
  SUBCASE("elementwise unary ops") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, c] = dims();
      const double s = gen.uniform(-2, 2), t = gen.uniform(-2, 2);
      CHECK(op_gradient_error({gen.tensor(r, c)},
                              [&](Graph& g, auto& x) { return g.affine(x[0], s, t); }, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c, -2, 2)},
                              [](Graph& g, auto& x) { return g.tanh(x[0]); }, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c, -2, 2)},
                              [](Graph& g, auto& x) { return g.exp(x[0]); }, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c, 0.5, 3)},
                              [](Graph& g, auto& x) { return g.log(x[0]); }, gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c, -2, 2)},
                              [](Graph& g, auto& x) { return g.square(x[0]); }, gen) < kTol);
    }
  }
  SUBCASE("reductions, slice, concat, reshape") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, c] = dims();
      CHECK(op_gradient_error({gen.tensor(r, c)}, [](Graph& g, auto& x) { return g.sum(x[0]); },
                              gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c)}, [](Graph& g, auto& x) { return g.mean(x[0]); },
                              gen) < kTol);
      const std::size_t r0 = gen.index(r), c0 = gen.index(c);
      const Range rows{r0, gen.range(r0 + 1, r)}, cols{c0, gen.range(c0 + 1, c)};
      CHECK(op_gradient_error({gen.tensor(r, c)},
                              [&](Graph& g, auto& x) { return g.slice(x[0], rows, cols); },
                              gen) < kTol);
      const std::size_t extra = gen.range(1, 4);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(extra, c)},
                              [](Graph& g, auto& x) { return g.concat(x[0], x[1], 0); },
                              gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c), gen.tensor(r, extra)},
                              [](Graph& g, auto& x) { return g.concat(x[0], x[1], 1); },
                              gen) < kTol);
      CHECK(op_gradient_error({gen.tensor(r, c)},
                              [&](Graph& g, auto& x) { return g.reshape(x[0], {c, r}); },
                              gen) < kTol);
    }
  }
  SUBCASE("clip, min, max away from kinks") {
    for (int n = 0; n < kInstances; ++n) {
      const auto [r, c] = dims();
      Tensor x = gen.tensor(r, c, -2, 2);
      for (auto& v : x.data()) v = away_from(v, {-0.7, 0.9}, 1e-3);
      CHECK(op_gradient_error({x}, [](Graph& g, auto& in) { return g.clip(in[0], -0.7, 0.9); },
                              gen) < kTol);
      Tensor a = gen.tensor(r, c), b = gen.tensor(r, c);
      for (std::size_t i = 0; i < a.size(); ++i) b[i] = away_from(b[i], {a[i]}, 1e-3);
      CHECK(op_gradient_error({a, b}, [](Graph& g, auto& in) { return g.min(in[0], in[1]); },
                              gen) < kTol);
      CHECK(op_gradient_error({a, b}, [](Graph& g, auto& in) { return g.max(in[0], in[1]); },
                              gen) < kTol);
    }
  }
}

TEST_CASE("forward values of small hand-computed graphs") {
  Graph g;
  const NodeId a = g.input("a"), b = g.input("b");
  const NodeId mm = g.matmul(a, b);
  const NodeId cat = g.concat(a, a, 1);
  const Tensor ta = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor tb = Tensor::matrix(2, 1, {5, 6});
  const auto e = forward(g, {{a, ta.view()}, {b, tb.view()}});
  CHECK(e.value(mm).data[0] == 17.0);
  CHECK(e.value(mm).data[1] == 39.0);
  CHECK(e.value(cat).shape == Shape{2, 4});
  CHECK(e.value(cat).data[2] == 1.0);
}

TEST_CASE("kink conventions: ties go to the first argument, clip passes on closed bounds") {
  Graph g;
  const NodeId a = g.input("a"), b = g.input("b");
  const NodeId loss = g.sum(g.add(g.min(a, b), g.clip(a, 0.0, 1.0)));
  const Tensor ta = Tensor::matrix(1, 3, {1.0, 0.0, 2.0});
  const Tensor tb = Tensor::matrix(1, 3, {1.0, 0.5, 0.0});
  Evaluation e = forward(g, {{a, ta.view()}, {b, tb.view()}});
  const auto grads = backward(g, e, loss);
  // a=1 ties b=1 (min -> a) and sits on the clip bound (passes): 2
  CHECK(grads.at(a)[0] == 2.0);
  CHECK(grads.at(b)[0] == 0.0);
  // a=0 < b and on the lower bound: 2
  CHECK(grads.at(a)[1] == 2.0);
  // a=2 > b, and clipped: 0
  CHECK(grads.at(a)[2] == 0.0);
  CHECK(grads.at(b)[2] == 1.0);
}

TEST_CASE("graph errors name the op and its shapes") {
  Graph g;
  const NodeId a = g.input("a"), b = g.input("b");
  g.matmul(a, b);
  const Tensor ta({2, 3}), tb({2, 3});
  CHECK_THROWS_WITH_AS(forward(g, {{a, ta.view()}, {b, tb.view()}}),
                       doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS(forward(g, {{a, ta.view()}}));  // b unbound

  Graph g2;
  const NodeId x = g2.input("x");
  const NodeId y = g2.tanh(x);
  const Tensor tx({2, 2}, 0.5);
  Evaluation ex = forward(g2, {{x, tx.view()}});
  CHECK_THROWS(backward(g2, ex, y));  // loss is not a scalar
}

TEST_CASE("backward routes sink leaves into caller buffers and zero-fills unused leaves") {
  Graph g;
  const NodeId p = g.input("p"), unused = g.input("u");
  const NodeId loss = g.sum(g.square(p));
  const Tensor tp = Tensor::matrix(1, 3, {1, 2, 3});
  const Tensor tu = Tensor::matrix(1, 2, {4, 5});
  Evaluation e = forward(g, {{p, tp.view()}, {unused, tu.view()}});
  std::vector<double> sink(3, 1.0);  // accumulates
  const auto grads = backward(g, e, loss, {{p, std::span<double>(sink)}});
  CHECK(sink == std::vector<double>{3.0, 5.0, 7.0});
  CHECK_FALSE(grads.contains(p));
  CHECK(grads.at(unused).storage() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("grad_check reports small error for a smooth graph") {
  Gen gen(3);
  const auto res = grad_check(
      [](Graph& g, NodeId x) { return g.mean(g.tanh(g.matmul(x, g.constant(Tensor::matrix(3, 1, {0.5, -1, 2}))))); },
      gen.tensor(4, 3), 1e-6);
  CHECK(res.max_rel_error < 1e-7);
}

TEST_CASE("adam: the first step moves every coordinate by the learning rate") {
  std::vector<double> p = {0.5, -1.0, 2.0};
  const std::vector<double> grad(3, 1.0);
  AdamState s(3, AdamHyper{1e-3, 0.9, 0.999, 1e-8});
  adam_step(p, grad, s);
  CHECK(p[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(-1.0 - 1e-3).epsilon(1e-9));
  CHECK(s.step == 1);
}

TEST_CASE("adam rejects non-finite gradients without touching state") {
  std::vector<double> p = {1.0, 2.0};
  AdamState s(2, AdamHyper{});
  const std::vector<double> bad = {0.1, std::nan("")};
  CHECK_THROWS(adam_step(p, bad, s));
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(s.step == 0);
  CHECK(s.m == std::vector<double>{0.0, 0.0});
}

TEST_CASE("global norm clipping") {
  std::vector<double> g = {3.0, 4.0};
  CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(std::hypot(g[0], g[1]) == doctest::Approx(1.0));
  std::vector<double> small = {0.1, 0.1};
  clip_global_norm(small, 1.0);
  CHECK(small == std::vector<double>{0.1, 0.1});
}

TEST_CASE("rng helpers are reproducible and serializable") {
  Rng a(42);
  const auto text = rng_to_string(a);
  const double n1 = standard_normal(a);
  Rng b = rng_from_string(text);
  CHECK(standard_normal(b) == n1);
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(a);
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("scalar examples") {
  Graph g;
  const NodeId x = g.input("x");
  const NodeId sq = g.square(x);
  const Tensor three = Tensor::scalar(3.0);
  Evaluation e = forward(g, {{x, three.view()}});
  CHECK(e.scalar(sq) == 9.0);
  CHECK(backward(g, e, sq).at(x)[0] == 6.0);

  Graph m;
  const NodeId a = m.input("a"), b = m.input("b");
  const NodeId lo = m.min(a, b);
  for (auto [va, vb, expect] : {std::tuple{2.0, 5.0, 1.0}, std::tuple{5.0, 2.0, 0.0}}) {
    const Tensor ta = Tensor::scalar(va), tb = Tensor::scalar(vb);
    Evaluation em = forward(m, {{a, ta.view()}, {b, tb.view()}});
    CHECK(backward(m, em, lo).at(a)[0] == expect);
  }

  Graph t;
  const NodeId z = t.input("z");
  const NodeId th = t.tanh(z);
  const Tensor zeros({2, 3});
  CHECK(forward(t, {{z, zeros.view()}}).copy(th).storage() == std::vector<double>(6, 0.0));
}

TEST_CASE("grad_check examples") {
  Gen gen(21);
  const auto sum = grad_check([](Graph& g, NodeId x) { return g.sum(x); }, gen.tensor(1, 8), 1e-6);
  CHECK(sum.max_rel_error < 1e-9);
  const auto th =
      grad_check([](Graph& g, NodeId x) { return g.sum(g.tanh(x)); }, gen.tensor(1, 8), 1e-6);
  CHECK(th.max_rel_error < 1e-7);
}

TEST_CASE("adam with zero gradient keeps parameters and decays moments") {
  std::vector<double> p = {1.0, -2.0};
  AdamState s(2, AdamHyper{});
  adam_step(p, std::vector<double>{1.0, 1.0}, s);
  const auto m1 = s.m;
  adam_step(p, std::vector<double>{0.0, 0.0}, s);
  CHECK(s.m[0] == doctest::Approx(0.9 * m1[0]));
  // the step uses the decayed first moment, so parameters still move; with
  // all-zero history they would not
  std::vector<double> q = {1.0, -2.0};
  AdamState fresh(2, AdamHyper{});
  adam_step(q, std::vector<double>{0.0, 0.0}, fresh);
  CHECK(q == std::vector<double>{1.0, -2.0});

  std::vector<double> r1 = {0.3}, r2 = {0.3};
  AdamState s1(1, AdamHyper{}), s2(1, AdamHyper{});
  adam_step(r1, std::vector<double>{0.7}, s1);
  adam_step(r2, std::vector<double>{0.7}, s2);
  CHECK(r1 == r2);
}
