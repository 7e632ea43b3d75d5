#include <doctest.h>

#include <cmath>
#include <numeric>

#include <acton/gradcheck.hpp>
#include <acton/layers.hpp>

using namespace acton;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = uniform(rng, lo, hi);
  return t;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
  return std::inner_product(y.storage().begin(), y.storage().end(), r.storage().begin(), 0.0);
}

Tensor seq(std::initializer_list<double> v) {
  Tensor t({1, v.size(), 1});
  std::copy(v.begin(), v.end(), t.storage().begin());
  return t;
}

}  // namespace

TEST_CASE("embedding lookup and accumulation") {
  Embedding e(2, 2);
  e.table.value.storage() = {1, 2, 3, 4};
  const std::vector<SymbolId> ids{1, 0};
  const auto x = e.forward(ids, 1);
  CHECK(x.storage() == std::vector<double>{3, 4, 1, 2});

  const std::vector<SymbolId> same{1, 1};
  e.forward(same, 1);
  e.table.zero_grad();
  Tensor g({1, 2, 2});
  g.storage() = {1, 2, 10, 20};
  e.backward(g);
  CHECK(e.table.grad.storage() == std::vector<double>{0, 0, 11, 22});

  const std::vector<SymbolId> bad{2};
  CHECK_THROWS_AS(e.forward(bad, 1), Error);
}

TEST_CASE("wide convolution by hand") {
  Conv1D c(1, 1, 2, 1);
  c.weight.value.storage() = {1, 1};
  c.bias.value.fill(0);
  const auto y = c.forward(seq({1, 2, 3}));
  CHECK(y.shape() == std::vector<std::size_t>{1, 4, 1});
  CHECK(y.storage() == std::vector<double>{1, 3, 5, 3});

  c.weight.value.fill(0);
  const auto z = c.forward(seq({1, 2, 3}));
  for (double v : z.storage()) CHECK(v == 0.0);
  c.weight.zero_grad();
  const auto dx = c.backward(Tensor({1, 4, 1}, 1.0));
  for (double v : dx.storage()) CHECK(v == 0.0);
  for (double v : c.weight.grad.storage()) CHECK(v == 0.0);

  for (std::size_t n : {3, 8, 17})
    for (std::size_t k : {1, 2, 5})
      for (std::size_t o : {0, 1, 4})
        if (n + 2 * o >= k) CHECK(Conv1D::output_length(n, k, o) == n + 2 * o - k + 1);

  Conv1D two(2, 3, 2, 1);
  CHECK_THROWS_AS(two.forward(seq({1, 2})), Error);
}

TEST_CASE("average pooling by hand") {
  AvgPool1D p(2, 1);
  CHECK(p.forward(seq({1, 3, 5, 3})).storage() == std::vector<double>{2, 4, 4});
  AvgPool1D unit(1, 1);
  CHECK(unit.forward(seq({1, 3, 5, 3})).storage() == std::vector<double>{1, 3, 5, 3});
  AvgPool1D global(4, 4);
  CHECK(global.forward(seq({1, 3, 5, 3})).storage() == std::vector<double>{3});
  AvgPool1D wide(5, 1);
  CHECK_THROWS_AS(wide.forward(seq({1, 3, 5, 3})), Error);
  CHECK(AvgPool1D::output_length(10, 4, 4) == 2);
}

TEST_CASE("batch norm examples") {
  BatchNorm bn(1);
  Tensor x({2, 1});
  x.storage() = {1, 3};
  const auto y = bn.forward(x, Mode::Train);
  CHECK(y[0] == doctest::Approx(-1).epsilon(1e-5));
  CHECK(y[1] == doctest::Approx(1).epsilon(1e-5));

  bn.gamma.value.fill(0);
  bn.beta.value.fill(0.7);
  const auto shifted = bn.forward(x, Mode::Train);
  for (double v : shifted.storage()) CHECK(v == 0.7);

  Tensor one({1, 1}, 2.0);
  CHECK_THROWS_AS(bn.forward(one, Mode::Train), Error);
  CHECK_NOTHROW(bn.forward(one, Mode::Eval));
}

TEST_CASE("property: batch norm train output is standardised per feature") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t R = 2 + uniform_index(rng, 30), F = 1 + uniform_index(rng, 6);
    BatchNorm bn(F);
    const auto x = random_tensor({R, F}, rng, -5, 5);
    const auto y = bn.forward(x, Mode::Train);
    for (std::size_t f = 0; f < F; ++f) {
      double m = 0, v = 0;
      for (std::size_t r = 0; r < R; ++r) m += y[r * F + f];
      m /= R;
      for (std::size_t r = 0; r < R; ++r) v += (y[r * F + f] - m) * (y[r * F + f] - m);
      v /= R;
      CHECK(std::abs(m) < 1e-9);
      // eps shrinks the variance slightly below one
      double xm = 0, xv = 0;
      for (std::size_t r = 0; r < R; ++r) xm += x[r * F + f];
      xm /= R;
      for (std::size_t r = 0; r < R; ++r) xv += (x[r * F + f] - xm) * (x[r * F + f] - xm);
      xv /= R;
      CHECK(std::abs(v - xv / (xv + 1e-5)) < 1e-6);
      CHECK(std::abs(v - 1.0) < 1e-3);
    }
  }
}

TEST_CASE("dropout modes and rate") {
  Rng rng(3);
  const auto x = random_tensor({1000, 100}, rng);
  Dropout d(0.5);
  CHECK(d.forward(x, Mode::Eval, rng) == x);
  Dropout off(0.0);
  CHECK(off.forward(x, Mode::Train, rng) == x);
  const auto y = d.forward(x, Mode::Train, rng);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) ++zeros;
    else CHECK(y[i] == doctest::Approx(2 * x[i]));
  }
  const double n = static_cast<double>(y.size());
  CHECK(std::abs(zeros / n - 0.5) < 3 * std::sqrt(0.25 / n));

  Rng r1(11), r2(11);
  Dropout a(0.3), b(0.3);
  a.forward(x, Mode::Train, r1);
  b.forward(x, Mode::Train, r2);
  CHECK(std::equal(a.mask().begin(), a.mask().end(), b.mask().begin(), b.mask().end()));
}

TEST_CASE("dense special cases") {
  Dense d(3, 3, false);
  d.weight.value.storage() = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  d.bias.value.fill(0);
  Rng rng(1);
  const auto x = random_tensor({4, 3}, rng);
  CHECK(d.forward(x) == x);
  d.weight.value.fill(0);
  const auto zeroed = d.forward(x);
  for (double v : zeroed.storage()) CHECK(v == 0.0);
  CHECK_THROWS_AS(d.forward(random_tensor({4, 2}, rng)), Error);
}

TEST_CASE("softmax examples and invariants") {
  Tensor z({1, 3}, 0.0);
  const auto flat = softmax(z);
  for (double p : flat.storage()) CHECK(p == doctest::Approx(1.0 / 3));
  Tensor l({1, 2});
  l.storage() = {std::log(1.0), std::log(3.0)};
  const auto p = softmax(l);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    auto x = random_tensor({3, 5}, rng, -30, 30);
    const auto a = softmax(x);
    const double c = uniform(rng, -100, 100);
    for (auto& v : x.storage()) v += c;
    const auto b = softmax(x);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) {
        s += a[r * 5 + k];
        CHECK(std::abs(a[r * 5 + k] - b[r * 5 + k]) < 1e-12);
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy with elastic net") {
  Tensor perfect({2, 2});
  perfect.storage() = {1, 0, 0, 1};
  const std::vector<int> gold{0, 1};
  Tensor w0({2, 1}, 0.0);
  CHECK(cross_entropy_elastic_net(perfect, gold, w0, 0, 0).loss == 0.0);

  Tensor uni({2, 3}, 1.0 / 3);
  CHECK(cross_entropy_elastic_net(uni, gold, w0, 0, 0).loss == doctest::Approx(std::log(3.0)));

  Tensor w({1, 1}, 2.0);
  for (double l1 : {0.0, 0.25, 1.0}) {
    const auto r = cross_entropy_elastic_net(perfect, gold, w, l1, 0.5);
    CHECK(r.loss == doctest::Approx(1.0 + 2 * l1));
    CHECK(r.d_weight[0] == doctest::Approx(0.5 * 2 + l1));
  }
  Tensor wz({1, 1}, 0.0);
  CHECK(cross_entropy_elastic_net(perfect, gold, wz, 1.0, 0.0).d_weight[0] == 0.0);

  Tensor zero({1, 2});
  zero.storage() = {1, 0};
  const std::vector<int> miss{1};
  const auto c = cross_entropy_elastic_net(zero, miss, w0, 0, 0);
  CHECK(c.clamped);
  CHECK(std::isfinite(c.loss));

  const std::vector<int> masked{-1, 1};
  const auto m = cross_entropy_elastic_net(uni, masked, w0, 0, 0);
  CHECK(m.counted == 1);
  CHECK(m.d_logits[0] == 0.0);
}

TEST_CASE("adam update") {
  Param p("w", {3});
  p.value.storage() = {1, 2, 3};
  AdamMoments st;
  AdamConfig cfg;
  p.grad.fill(0);
  for (int i = 0; i < 5; ++i) adam_step(p, st, cfg);
  CHECK(p.value.storage() == std::vector<double>{1, 2, 3});

  Param q("w", {1});
  q.value.fill(0.5);
  q.grad.fill(1.0);
  AdamMoments s2;
  adam_step(q, s2, cfg);
  CHECK(q.value[0] - 0.5 == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(s2.step == 1);

  Param a("a", {4}), b("b", {4});
  AdamMoments sa, sb;
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    for (std::size_t k = 0; k < 4; ++k) a.grad[k] = b.grad[k] = uniform(rng, -1, 1);
    adam_step(a, sa, cfg);
    adam_step(b, sb, cfg);
  }
  CHECK(a.value == b.value);
}

TEST_CASE("gradient checks per layer") {
  for (int inst = 0; inst < 20; ++inst) {
    Rng rng(derive_seed(31, 0, static_cast<std::uint64_t>(inst)));
    const std::size_t B = 2 + uniform_index(rng, 2), n = 4 + uniform_index(rng, 6),
                      C = 1 + uniform_index(rng, 3), N = 1 + uniform_index(rng, 3),
                      k = 1 + uniform_index(rng, 3);

    SUBCASE("conv") {
      Conv1D c(C, N, k, k - 1);
      init_uniform_fan_in(c.weight.value, k * C, rng);
      for (auto& v : c.bias.value.storage()) v = uniform(rng, -0.2, 0.2);
      auto x = random_tensor({B, n, C}, rng);
      const auto y = c.forward(x);
      const auto r = random_tensor(y.shape(), rng);
      c.weight.zero_grad();
      c.bias.zero_grad();
      const auto dx = c.backward(r);
      const GradTarget t[] = {{"x", x.values(), dx.values()},
                              {"w", c.weight.value.values(), c.weight.grad.values()},
                              {"b", c.bias.value.values(), c.bias.grad.values()}};
      const auto rep = check_gradients([&] { return weighted_sum(c.forward(x), r); }, t, 1e-4);
      CHECK_MESSAGE(rep.passed, rep.worst_path << " " << rep.max_rel_error);
    }
    SUBCASE("pool") {
      const std::size_t l = 1 + uniform_index(rng, n), s = 1 + uniform_index(rng, 3);
      AvgPool1D p(l, s);
      auto x = random_tensor({B, n, C}, rng);
      const auto r = random_tensor(p.forward(x).shape(), rng);
      const auto dx = p.backward(r);
      const GradTarget t[] = {{"x", x.values(), dx.values()}};
      CHECK(check_gradients([&] { return weighted_sum(p.forward(x), r); }, t, 1e-4).passed);
    }
    SUBCASE("batchnorm") {
      BatchNorm bn(C);
      for (auto& v : bn.gamma.value.storage()) v = uniform(rng, 0.5, 1.5);
      for (auto& v : bn.beta.value.storage()) v = uniform(rng, -0.5, 0.5);
      auto x = random_tensor({B, n, C}, rng);
      const auto r = random_tensor({B, n, C}, rng);
      bn.forward(x, Mode::Train);
      bn.gamma.zero_grad();
      bn.beta.zero_grad();
      const auto dx = bn.backward(r);
      const GradTarget t[] = {{"x", x.values(), dx.values()},
                              {"gamma", bn.gamma.value.values(), bn.gamma.grad.values()},
                              {"beta", bn.beta.value.values(), bn.beta.grad.values()}};
      const auto rep =
          check_gradients([&] { return weighted_sum(bn.forward(x, Mode::Train), r); }, t, 1e-4);
      CHECK_MESSAGE(rep.passed, rep.worst_path << " " << rep.max_rel_error);
    }
    SUBCASE("dense") {
      Dense d(n, N + 1, true);
      init_uniform_fan_in(d.weight.value, n, rng);
      for (auto& v : d.bias.value.storage()) v = uniform(rng, -0.2, 0.2);
      auto x = random_tensor({B, n}, rng);
      const auto r = random_tensor({B, N + 1}, rng);
      d.forward(x);
      d.weight.zero_grad();
      d.bias.zero_grad();
      const auto dx = d.backward(r);
      const GradTarget t[] = {{"x", x.values(), dx.values()},
                              {"w", d.weight.value.values(), d.weight.grad.values()},
                              {"b", d.bias.value.values(), d.bias.grad.values()}};
      CHECK(check_gradients([&] { return weighted_sum(d.forward(x), r); }, t, 1e-4).passed);
    }
    SUBCASE("embedding") {
      Embedding e(6, C);
      for (auto& v : e.table.value.storage()) v = uniform(rng, -1, 1);
      std::vector<SymbolId> ids(B * n);
      for (auto& id : ids) id = static_cast<SymbolId>(uniform_index(rng, 6));
      const auto r = random_tensor({B, n, C}, rng);
      e.forward(ids, B);
      e.table.zero_grad();
      e.backward(r);
      const GradTarget t[] = {{"E", e.table.value.values(), e.table.grad.values()}};
      CHECK(check_gradients([&] { return weighted_sum(e.forward(ids, B), r); }, t, 1e-6).passed);
    }
    SUBCASE("softmax cross-entropy") {
      const std::size_t K = 2 + uniform_index(rng, 2);
      auto logits = random_tensor({B, K}, rng, -2, 2);
      auto w = random_tensor({K, 3}, rng);
      std::vector<int> gold(B);
      for (auto& g : gold) g = static_cast<int>(uniform_index(rng, K));
      gold[0] = -1;
      const double l1 = 0.25, l2 = 0.5;
      const auto res = cross_entropy_elastic_net(softmax(logits), gold, w, l1, l2);
      const GradTarget t[] = {{"logits", logits.values(), res.d_logits.values()},
                              {"W", w.values(), res.d_weight.values()}};
      auto f = [&] { return cross_entropy_elastic_net(softmax(logits), gold, w, l1, l2).loss; };
      CHECK(check_gradients(f, t, 1e-4).passed);
    }
  }
}

TEST_CASE("gradient checker flags a corrupted backward") {
  Rng rng(4);
  Dense d(4, 2, false);
  init_uniform_fan_in(d.weight.value, 4, rng);
  auto x = random_tensor({3, 4}, rng);
  const auto r = random_tensor({3, 2}, rng);
  d.forward(x);
  d.weight.zero_grad();
  d.backward(r);
  auto wrong = d.weight.grad.storage();
  for (auto& g : wrong) g *= 1.1;
  const GradTarget good[] = {{"w", d.weight.value.values(), d.weight.grad.values()}};
  const GradTarget bad[] = {{"w", d.weight.value.values(), wrong}};
  auto f = [&] { return weighted_sum(d.forward(x), r); };
  CHECK(check_gradients(f, good, 1e-6).max_rel_error < 1e-6);
  const auto rep = check_gradients(f, bad, 1e-4);
  CHECK_FALSE(rep.passed);
  CHECK(rep.max_rel_error > 1e-2);
  CHECK(rep.worst_path == "w");
}
