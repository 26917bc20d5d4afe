#include <cmath>
#include <numeric>

#include "doctest.h"
#include "uird/error.hpp"
#include "uird/nn/checkpoint.hpp"
#include "uird/nn/gradcheck.hpp"
#include "uird/nn/ops.hpp"
#include "uird/nn/optim.hpp"

using namespace uird;
using namespace uird::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Parameter make_param(const std::string& name, Tensor value) {
  Parameter p;
  p.name = name;
  p.grad = Tensor(value.shape(), 0.0);
  p.value = std::move(value);
  return p;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Weighted sum with fixed random weights, so every output entry reaches the
// loss with a distinct coefficient.
Var probe_loss(Var y, std::uint64_t seed) {
  Rng rng(seed);
  Tensor w = random_tensor(y.shape(), rng);
  return sum(mul(y, y.tape().constant(std::move(w))));
}

}  // namespace

TEST_SUITE("conv1d") {
  TEST_CASE("identity kernel") {
    Tape t;
    Var x = t.constant(Tensor({1, 1, 3}, {1, 2, 3}));
    Var w = t.constant(Tensor({1, 1, 1}, {1}));
    Var y = conv1d(x, w, Var(), 1, 0);
    CHECK(y.value().vec() == std::vector<double>{1, 2, 3});
  }

  TEST_CASE("two-tap sliding sum") {
    Tape t;
    Var x = t.constant(Tensor({1, 1, 4}, {1, 2, 3, 4}));
    Var w = t.constant(Tensor({1, 1, 2}, {1, 1}));
    Var y = conv1d(x, w, Var(), 1, 0);
    CHECK(y.value().vec() == std::vector<double>{3, 5, 7});
  }

  TEST_CASE("shape law") {
    CHECK(conv1d_output_length(320, 4, 2, 1) == 160);
    CHECK(tconv1d_output_length(160, 4, 2, 1) == 320);
    CHECK_THROWS_AS(conv1d_output_length(2, 5, 1, 1), Error);

    Rng rng(11);
    std::uniform_int_distribution<std::size_t> pick(1, 9);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t len = pick(rng) + 3, k = pick(rng), s = (pick(rng) % 3) + 1, p = pick(rng) % 3;
      if (len + 2 * p < k) continue;
      Tape tp;
      Var x = tp.constant(random_tensor({2, 3, len}, rng));
      Var w = tp.constant(random_tensor({4, 3, k}, rng));
      Var y = conv1d(x, w, Var(), s, p);
      CHECK(y.shape() == Shape{2, 4, (len + 2 * p - k) / s + 1});
      if ((len - 1) * s + k > 2 * p) {
        Var w2 = tp.constant(random_tensor({3, 4, k}, rng));
        Var z = tconv1d(x, w2, Var(), s, p);
        CHECK(z.shape() == Shape{2, 4, (len - 1) * s + k - 2 * p});
      }
    }
  }

  TEST_CASE("brute-force sliding window with stride and padding") {
    Rng rng(5);
    Tensor x = random_tensor({2, 3, 11}, rng), w = random_tensor({4, 3, 3}, rng), b = random_tensor({4}, rng);
    Tape t;
    Var y = conv1d(t.constant(x), t.constant(w), t.constant(b), 2, 1);
    const std::size_t lout = 6;
    REQUIRE(y.shape() == Shape{2, 4, lout});
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t co = 0; co < 4; ++co)
        for (std::size_t o = 0; o < lout; ++o) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < 3; ++ci)
            for (std::size_t k = 0; k < 3; ++k) {
              const long pos = static_cast<long>(o * 2 + k) - 1;
              if (pos < 0 || pos >= 11) continue;
              acc += w[(co * 3 + ci) * 3 + k] * x[(n * 3 + ci) * 11 + static_cast<std::size_t>(pos)];
            }
          CHECK(y.value()[(n * 4 + co) * lout + o] == doctest::Approx(acc).epsilon(1e-14));
        }
  }
}

TEST_SUITE("tconv1d") {
  TEST_CASE("unit kernel is identity") {
    Tape t;
    Var x = t.constant(Tensor({1, 1, 3}, {4, -1, 2}));
    Var y = tconv1d(x, t.constant(Tensor({1, 1, 1}, {1})), Var(), 1, 0);
    CHECK(y.value().vec() == std::vector<double>{4, -1, 2});
  }

  TEST_CASE("adjoint of conv1d") {
    Rng rng(3);
    const struct {
      std::size_t len, k, s, p;
    } cases[] = {{5, 3, 1, 0}, {5, 3, 1, 1}, {9, 3, 2, 1}, {8, 4, 2, 1}, {5, 1, 1, 0}};
    for (const auto& c : cases) {
      for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_tensor({1, 2, c.len}, rng);
        Tensor w = random_tensor({3, 2, c.k}, rng);
        Tape t;
        Var ca = conv1d(t.constant(a), t.constant(w), Var(), c.s, c.p);
        Tensor b = random_tensor(ca.shape(), rng);
        Var tb = tconv1d(t.constant(b), t.constant(w), Var(), c.s, c.p);
        if (tb.shape() != a.shape()) continue;
        const double lhs = dot(ca.value(), b), rhs = dot(a, tb.value());
        CHECK(std::fabs(lhs - rhs) <= 1e-10 * std::max(1.0, std::fabs(lhs)));
      }
    }
  }
}

TEST_SUITE("batchnorm") {
  TEST_CASE("train mode normalizes each channel") {
    Rng rng(8);
    Tensor x = random_tensor({4, 2, 10}, rng, 3.0);
    for (double& v : x.data()) v += 5.0;
    Parameter g = make_param("g", Tensor({2}, 1.0)), b = make_param("b", Tensor({2}, 0.0));
    Tensor rm({2}, 0.0), rv({2}, 1.0);
    Tape t;
    Var y = batchnorm(t.constant(x), t.parameter(g), t.parameter(b), {&rm, &rv, 0.9, 1e-5}, true);
    for (std::size_t ch = 0; ch < 2; ++ch) {
      double m = 0.0, sq = 0.0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t l = 0; l < 10; ++l) m += y.value()[(n * 2 + ch) * 10 + l];
      m /= 40.0;
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t l = 0; l < 10; ++l) sq += std::pow(y.value()[(n * 2 + ch) * 10 + l] - m, 2);
      CHECK(std::fabs(m) < 1e-6);
      CHECK(std::fabs(std::sqrt(sq / 40.0) - 1.0) < 1e-4);
      CHECK(rm[ch] != 0.0);  // running stats moved
    }
  }

  TEST_CASE("already normalized input passes through") {
    Tensor x({4, 1}, {1, -1, 1, -1});
    Parameter g = make_param("g", Tensor({1}, 1.0)), b = make_param("b", Tensor({1}, 0.0));
    Tape t;
    Var y = batchnorm(t.constant(x), t.parameter(g), t.parameter(b), {}, true);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y.value()[i] == doctest::Approx(x[i]).epsilon(1e-5));
  }

  TEST_CASE("eval mode uses running statistics") {
    Tensor x({2, 2, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    Tensor rm({2}, {0.5, -1.0}), rv({2}, {2.0, 0.25});
    Parameter g = make_param("g", Tensor({2}, {1.5, 0.5})), b = make_param("b", Tensor({2}, {0.1, -0.2}));
    Tape t;
    Var y = batchnorm(t.constant(x), t.parameter(g), t.parameter(b), {&rm, &rv, 0.9, 1e-5}, false);
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t l = 0; l < 3; ++l) {
          const std::size_t i = (n * 2 + ch) * 3 + l;
          const double expect = (x[i] - rm[ch]) / std::sqrt(rv[ch] + 1e-5) * g.value[ch] + b.value[ch];
          CHECK(y.value()[i] == expect);
        }
  }
}

TEST_SUITE("elementwise") {
  TEST_CASE("leaky relu") {
    Parameter x = make_param("x", Tensor({3}, {2.0, -2.0, -1.0}));
    Tape t;
    Var y = leaky_relu(t.parameter(x), 0.2);
    CHECK(y.value()[0] == 2.0);
    CHECK(y.value()[1] == doctest::Approx(-0.4));
    t.backward(sum(y));
    CHECK(x.grad[2] == doctest::Approx(0.2));
    Tape other;
    CHECK_THROWS_AS(leaky_relu(other.constant(Tensor({1}, 1.0)), 1.5), Error);
  }

  TEST_CASE("dense") {
    Tape t;
    Var x = t.constant(Tensor({1, 2}, {1, 1}));
    Var y = dense(x, t.constant(Tensor({2, 2}, {1, 2, 3, 4})), t.constant(Tensor({2}, 0.0)));
    CHECK(y.value().vec() == std::vector<double>{3, 7});
    Var id = dense(t.constant(Tensor({1, 2}, {5, -3})), t.constant(Tensor({2, 2}, {1, 0, 0, 1})),
                   t.constant(Tensor({2}, 0.0)));
    CHECK(id.value().vec() == std::vector<double>{5, -3});
    Var zero = dense(x, t.constant(Tensor({2, 2}, 0.0)), t.constant(Tensor({2}, {0.5, -2})));
    CHECK(zero.value().vec() == std::vector<double>{0.5, -2});
  }

  TEST_CASE("cosine similarity") {
    const std::vector<double> v{0.3, -1.2, 2.0}, nv{-0.3, 1.2, -2.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
    CHECK(cosine_similarity(v, nv) == doctest::Approx(-1.0));
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{1, 1}) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 0.0);
  }

  TEST_CASE("softmax cross entropy") {
    Tape t;
    std::vector<int> target{2};
    Tensor probs;
    Var l = softmax_cross_entropy(t.constant(Tensor({1, 4}, 0.7)), target, &probs);
    CHECK(l.value()[0] == doctest::Approx(std::log(4.0)).epsilon(1e-14));
    CHECK(std::accumulate(probs.data().begin(), probs.data().end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    Var sure = softmax_cross_entropy(t.constant(Tensor({1, 3}, {0, 0, 1e4})), target);
    CHECK(sure.value()[0] == doctest::Approx(0.0));
    CHECK(sure.value()[0] >= 0.0);

    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor logits = random_tensor({3, 5}, rng, 4.0);
      Tensor p;
      std::vector<int> tg{0, 3, 4};
      Tape tp;
      Var loss = softmax_cross_entropy(tp.constant(logits), tg, &p);
      CHECK(loss.value()[0] >= 0.0);
      for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::size_t q = 0; q < 5; ++q) s += p[r * 5 + q];
        CHECK(std::fabs(s - 1.0) < 1e-9);
      }
    }
  }

  TEST_CASE("softmax cross entropy gradient is p - onehot") {
    Parameter logits = make_param("logits", Tensor({1, 4}, {0.3, -1.0, 2.0, 0.5}));
    std::vector<int> target{1};
    auto loss = [&](Tape& t) { return softmax_cross_entropy(t.parameter(logits), target); };
    ParameterSet ps;
    ps.add(logits);
    auto rep = finite_diff_check(ps, loss);
    CHECK(rep.passed);
    Tensor p;
    Tape t;
    t.backward(softmax_cross_entropy(t.parameter(logits), target, &p));
    for (std::size_t q = 0; q < 4; ++q) CHECK(logits.grad[q] == doctest::Approx(p[q] - (q == 1)).epsilon(1e-14));
  }
}

TEST_SUITE("backward") {
  TEST_CASE("square at 3") {
    Parameter x = make_param("x", Tensor({1}, 3.0));
    Tape t;
    t.backward(square(t.parameter(x)));
    CHECK(x.grad[0] == 6.0);
  }

  TEST_CASE("constant loss yields zero gradient") {
    Parameter x = make_param("x", Tensor({2}, {1.0, 2.0}));
    x.grad = Tensor({2}, 9.0);
    Tape t;
    t.parameter(x);
    t.backward(t.constant(Tensor({1}, 4.0)));
    CHECK(x.grad.vec() == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("gradients are zeroed unless retained") {
    Parameter x = make_param("x", Tensor({1}, 2.0));
    for (int i = 0; i < 2; ++i) {
      Tape t;
      t.backward(square(t.parameter(x)));
    }
    CHECK(x.grad[0] == 4.0);
    Tape t;
    t.backward(square(t.parameter(x)), true);
    CHECK(x.grad[0] == 8.0);
  }

  TEST_CASE("second backward on a freed graph throws") {
    Parameter x = make_param("x", Tensor({1}, 2.0));
    Tape t;
    Var y = square(t.parameter(x));
    t.backward(y);
    CHECK_THROWS_AS(t.backward(y), Error);
  }

  TEST_CASE("non-finite detection mode") {
    Tape t;
    t.set_check_finite(true);
    Var x = t.constant(Tensor({1}, -1.0));
    CHECK_THROWS_AS(log_clamped(scale(x, 1e308 * 10), 0.0), Error);
  }

  TEST_CASE("leaky_relu(dense(x)) matches finite differences") {
    Rng rng(21);
    Parameter x = make_param("x", random_tensor({3, 5}, rng));
    Parameter w = make_param("w", random_tensor({4, 5}, rng));
    Parameter b = make_param("b", random_tensor({4}, rng));
    ParameterSet ps;
    ps.add(x);
    ps.add(w);
    ps.add(b);
    auto loss = [&](Tape& t) {
      return probe_loss(leaky_relu(dense(t.parameter(x), t.parameter(w), t.parameter(b)), 0.2), 9);
    };
    auto rep = finite_diff_check(ps, loss, {.tolerance = 1e-6});
    CHECK_MESSAGE(rep.passed, rep.max_rel_error);
  }
}

TEST_SUITE("finite_diff_check") {
  TEST_CASE("every op passes at 1e-5") {
    Rng rng(31);
    Parameter x3 = make_param("x3", random_tensor({2, 2, 9}, rng));
    Parameter cw = make_param("cw", random_tensor({3, 2, 4}, rng));
    Parameter cb = make_param("cb", random_tensor({3}, rng));
    Parameter tw = make_param("tw", random_tensor({2, 3, 4}, rng));
    Parameter tb = make_param("tb", random_tensor({3}, rng));
    Parameter g = make_param("g", random_tensor({2}, rng));
    Parameter be = make_param("be", random_tensor({2}, rng));
    Parameter z = make_param("z", random_tensor({3, 4}, rng));
    Parameter m = make_param("m", random_tensor({5, 4}, rng));
    Parameter p01 = make_param("p", Tensor({6}, {0.1, 0.4, 0.7, 0.2, 0.95, 0.5}));
    Tensor rm({2}, 0.0), rv({2}, 1.0);

    const std::vector<std::pair<std::string, std::function<Var(Tape&)>>> cases = {
        {"conv1d", [&](Tape& t) { return probe_loss(conv1d(t.parameter(x3), t.parameter(cw), t.parameter(cb), 2, 1), 1); }},
        {"tconv1d", [&](Tape& t) { return probe_loss(tconv1d(t.parameter(x3), t.parameter(tw), t.parameter(tb), 2, 1), 2); }},
        {"batchnorm-train", [&](Tape& t) { return probe_loss(batchnorm(t.parameter(x3), t.parameter(g), t.parameter(be), {&rm, &rv}, true), 3); }},
        {"batchnorm-eval", [&](Tape& t) { return probe_loss(batchnorm(t.parameter(x3), t.parameter(g), t.parameter(be), {&rm, &rv}, false), 4); }},
        {"cosine", [&](Tape& t) { return probe_loss(cosine_similarity(t.parameter(z), t.parameter(m)), 5); }},
        {"softmax", [&](Tape& t) { return probe_loss(softmax_rows(t.parameter(z)), 6); }},
        {"matmul", [&](Tape& t) { return probe_loss(matmul(softmax_rows(cosine_similarity(t.parameter(z), t.parameter(m))), t.parameter(m)), 7); }},
        {"sigmoid+log", [&](Tape& t) { return probe_loss(log_clamped(sigmoid(t.parameter(p01))), 8); }},
        {"square+abs+mean", [&](Tape& t) { return mean(add(square(t.parameter(z)), abs(sub(t.parameter(z), t.constant(Tensor({3, 4}, 0.1)))))); }},
        {"dense", [&](Tape& t) { return probe_loss(dense(t.parameter(z), t.parameter(m), Var()), 9); }},
    };
    for (const auto& [name, fn] : cases) {
      ParameterSet ps;
      for (Parameter* p : {&x3, &cw, &cb, &tw, &tb, &g, &be, &z, &m, &p01}) ps.add(*p);
      // Restrict to the parameters each case reaches; unreached ones have
      // zero analytic and zero numeric gradient and pass trivially.
      auto rep = finite_diff_check(ps, fn, {.min_samples = 400, .tolerance = 1e-5});
      CHECK_MESSAGE(rep.passed, name << " max rel err " << rep.max_rel_error << " at "
                                     << rep.worst_parameter << "[" << rep.worst_index << "]");
    }
  }

  TEST_CASE("layer stack composition") {
    Sequential net("net", {1, 16},
                   {LayerSpec::conv1d(3, 4, 2, 1), LayerSpec::leaky_relu(0.2), LayerSpec::batchnorm(),
                    LayerSpec::flatten(), LayerSpec::dense(6), LayerSpec::flatten({3, 2}),
                    LayerSpec::tconv1d(2, 4, 2, 1), LayerSpec::leaky_relu(0.2), LayerSpec::flatten(),
                    LayerSpec::dense(2)},
                   17);
    Rng rng(2);
    Tensor x = random_tensor({4, 1, 16}, rng);
    auto loss = [&](Tape& t) { return probe_loss(net.forward(t, t.constant(x), Mode::Train), 12); };
    auto rep = finite_diff_check(net.parameters(), loss, {.min_samples = 150, .tolerance = 1e-5});
    CHECK_MESSAGE(rep.passed, rep.max_rel_error << " at " << rep.worst_parameter);
    CHECK(rep.checked == 150);
  }

  TEST_CASE("linear network is exact to rounding") {
    Sequential net("lin", {5}, {LayerSpec::dense(4), LayerSpec::dense(3)}, 3);
    Rng rng(1);
    Tensor x = random_tensor({2, 5}, rng);
    auto loss = [&](Tape& t) { return probe_loss(net.forward(t, t.constant(x), Mode::Train), 1); };
    auto rep = finite_diff_check(net.parameters(), loss, {.tolerance = 1e-8});
    CHECK_MESSAGE(rep.passed, rep.max_rel_error);
  }

  TEST_CASE("corrupted gradient fails the check") {
    Sequential net("lin", {5}, {LayerSpec::dense(4), LayerSpec::leaky_relu(0.2), LayerSpec::dense(3)}, 3);
    Rng rng(1);
    Tensor x = random_tensor({2, 5}, rng);
    auto loss = [&](Tape& t) { return probe_loss(net.forward(t, t.constant(x), Mode::Train), 1); };
    auto rep = finite_diff_check(net.parameters(), loss, {}, [](ParameterSet& ps) {
      for (auto* p : ps)
        for (double& g : p->grad.data()) g *= 1.01;
    });
    CHECK_FALSE(rep.passed);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradient leaves parameters unchanged") {
    Parameter p = make_param("p", Tensor({3}, {1, -2, 3}));
    ParameterSet ps;
    ps.add(p);
    Adam opt({.lr = 0.1});
    for (int i = 0; i < 5; ++i) opt.step(ps);
    CHECK(p.value.vec() == std::vector<double>{1, -2, 3});
  }

  TEST_CASE("unit gradient descends") {
    Parameter p = make_param("p", Tensor({1}, 0.0));
    ParameterSet ps;
    ps.add(p);
    Adam opt({.lr = 0.1});
    double prev = p.value[0];
    for (int i = 0; i < 10; ++i) {
      p.grad[0] = 1.0;
      opt.step(ps);
      if (i == 0) CHECK(p.value[0] == doctest::Approx(-0.1).epsilon(1e-6));
      CHECK(p.value[0] < prev);
      prev = p.value[0];
    }
  }

  TEST_CASE("non-trainable buffers are skipped") {
    Parameter p = make_param("p", Tensor({1}, 5.0));
    p.trainable = false;
    p.grad[0] = 1.0;
    ParameterSet ps;
    ps.add(p);
    Adam opt({.lr = 0.1});
    opt.step(ps);
    CHECK(p.value[0] == 5.0);
  }

  TEST_CASE("training is bit-reproducible") {
    auto run = [] {
      Sequential net("n", {1, 12},
                     {LayerSpec::conv1d(2, 3, 1, 1), LayerSpec::batchnorm(), LayerSpec::leaky_relu(0.2),
                      LayerSpec::flatten(), LayerSpec::dense(2)},
                     99);
      Rng rng(7);
      Tensor x = random_tensor({5, 1, 12}, rng);
      std::vector<int> y{0, 1, 0, 1, 1};
      Adam opt({.lr = 1e-2});
      auto ps = net.parameters();
      for (int step = 0; step < 20; ++step) {
        Tape t;
        t.backward(softmax_cross_entropy(net.forward(t, t.constant(x), Mode::Train), y));
        opt.step(ps);
      }
      std::vector<double> flat;
      for (auto* p : ps) flat.insert(flat.end(), p->value.data().begin(), p->value.data().end());
      return flat;
    };
    CHECK(run() == run());
  }
}

TEST_SUITE("layers") {
  TEST_CASE("kaiming init bound") {
    Sequential net("n", {64}, {LayerSpec::dense(32), LayerSpec::leaky_relu(0.2)}, 1);
    const double bound = std::sqrt(2.0 / 1.04) * std::sqrt(3.0 / 64.0);
    double mx = 0.0;
    for (double v : net.parameters()[0].value.data()) mx = std::max(mx, std::fabs(v));
    CHECK(mx <= bound);
    CHECK(mx > 0.9 * bound);
  }

  TEST_CASE("invalid specs are rejected") {
    CHECK_THROWS_AS(Sequential("n", {8}, {LayerSpec::conv1d(2, 3, 1, 0)}, 1), Error);
    CHECK_THROWS_AS(Sequential("n", {1, 8}, {LayerSpec::leaky_relu(0.0)}, 1), Error);
    CHECK_THROWS_AS(Sequential("n", {1, 8}, {LayerSpec::conv1d(0, 3, 1, 0)}, 1), Error);
  }

  TEST_CASE("output head widening keeps old rows") {
    Sequential net("n", {3}, {LayerSpec::dense(2)}, 5);
    const Tensor before = net.parameters()[0].value;
    net.resize_output(3, 77);
    const Tensor& after = net.parameters()[0].value;
    REQUIRE(after.shape() == Shape{3, 3});
    for (std::size_t i = 0; i < 6; ++i) CHECK(after[i] == before[i]);
    CHECK(net.output_shape() == Shape{3});
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Sequential net("n", {1, 10},
                 {LayerSpec::conv1d(2, 3, 1, 1), LayerSpec::batchnorm(), LayerSpec::flatten(), LayerSpec::dense(3)},
                 4);
  Checkpoint ck;
  ck.metadata["kind"] = "test";
  ck.metadata["tau"] = "0.1";
  auto ps = net.parameters();
  ps[0].value[0] = 0.1 + 0.2;  // non-representable decimal
  export_parameters(ps, ck);
  const std::string bytes = encode_checkpoint(ck);
  Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.metadata == ck.metadata);
  REQUIRE(back.tensors.size() == ck.tensors.size());
  for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
    CHECK(back.tensors[i].first == ck.tensors[i].first);
    CHECK(back.tensors[i].second == ck.tensors[i].second);
  }
  CHECK(encode_checkpoint(back) == bytes);

  Sequential other("n", {1, 10},
                   {LayerSpec::conv1d(2, 3, 1, 1), LayerSpec::batchnorm(), LayerSpec::flatten(), LayerSpec::dense(3)},
                   5);
  auto ops = other.parameters();
  import_parameters(ops, back);
  CHECK(ops[0].value == ps[0].value);

  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  CHECK_THROWS_AS(decode_checkpoint("garbage!"), Error);
}
