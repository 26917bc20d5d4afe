#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "uird/error.hpp"
#include "uird/madegan.hpp"
#include "uird/nn/gradcheck.hpp"
#include "uird/nn/ops.hpp"

using namespace uird;
using namespace uird::madegan;
using nn::Tensor;
using nn::Var;

namespace {

// Big enough to learn something, small enough for unit tests.
Architecture small_arch() {
  Architecture a;
  a.input_length = 32;
  a.channels = {4, 8};
  a.latent_dim = 8;
  a.memory_slots = 10;
  return a;
}

BeatSet sine_beats(std::size_t n, std::size_t len, double freq, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.05);
  std::uniform_real_distribution<double> phase(-0.3, 0.3);
  BeatSet out(n);
  for (auto& b : out) {
    const double ph = phase(rng);
    for (std::size_t j = 0; j < len; ++j) b.values.push_back(std::sin(freq * j * 2 * M_PI / len + ph) + g(rng));
    b.label = 'N';
  }
  return out;
}

Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = g(rng);
  return t;
}

std::vector<double> random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(k);
  double s = 0;
  for (double& v : w) s += (v = e(rng));
  for (double& v : w) v /= s;
  return w;
}

}  // namespace

TEST_CASE("memory addressing worked examples") {
  const std::vector<double> z{0.3, -1.2, 2.0};
  Tensor m({2, 3}, {0.3, -1.2, 2.0, -0.3, 1.2, -2.0});
  auto w = address_memory(z, m);
  const double e = std::exp(1.0), ie = std::exp(-1.0);
  CHECK(w[0] == doctest::Approx(e / (e + ie)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(ie / (e + ie)).epsilon(1e-12));
  CHECK(w[0] == doctest::Approx(0.881).epsilon(1e-3));

  Tensor same({4, 3}, {1, 2, 3, 1, 2, 3, 1, 2, 3, 1, 2, 3});
  for (double v : address_memory(z, same)) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<double> zero{0, 0, 0};
  for (double v : address_memory(zero, m)) CHECK(v == 0.5);

  CHECK(retrieve(std::vector<double>{0, 1}, m) == std::vector<double>{-0.3, 1.2, -2.0});
  auto mean = retrieve(std::vector<double>{0.5, 0.5}, Tensor({2, 2}, {1, 2, 3, 6}));
  CHECK(mean == std::vector<double>{2, 4});
}

TEST_CASE("memory addressing properties on random instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng() % 12, d = 1 + rng() % 9;
    Tensor m = random_tensor({k, d}, rng);
    std::vector<double> z = random_tensor({d}, rng).vec();
    auto w = address_memory(z, m);
    double s = 0;
    for (double v : w) {
      REQUIRE(v >= 0.0);
      s += v;
    }
    REQUIRE(std::fabs(s - 1.0) < 1e-9);

    auto sw = random_simplex(k, rng);
    auto got = retrieve(sw, m);
    for (std::size_t j = 0; j < d; ++j) {
      double ref = 0;
      for (std::size_t i = 0; i < k; ++i) ref += sw[i] * m[i * d + j];
      REQUIRE(std::fabs(got[j] - ref) < 1e-10);
    }
  }
}

TEST_CASE("squared error and percentile") {
  const std::vector<double> x{1, 0, 0}, zero{0, 0, 0};
  CHECK(squared_error(x, zero) == 1.0);
  CHECK(squared_error(x, x) == 0.0);

  std::vector<double> s(100);
  std::iota(s.begin(), s.end(), 1.0);
  std::shuffle(s.begin(), s.end(), std::mt19937_64(1));
  const double t95 = percentile(s, 95);
  CHECK(std::count_if(s.begin(), s.end(), [&](double v) { return v > t95; }) == 5);
  CHECK(percentile(s, 100) == 100.0);
  CHECK(percentile(s, 0) == 1.0);
  double prev = -1;
  for (double p = 0; p <= 100; p += 2.5) {
    CHECK(percentile(s, p) >= prev);
    prev = percentile(s, p);
  }
  CHECK_THROWS_AS(percentile({}, 50), Error);
  CHECK_THROWS_AS(percentile(s, 101), Error);
}

TEST_CASE("adversarial loss limits") {
  nn::Tape tape;
  Var half = tape.constant(Tensor({4, 1}, 0.5));
  CHECK(discriminator_loss(half, half).value()[0] == doctest::Approx(-2 * std::log(0.5)).epsilon(1e-12));
  CHECK(-discriminator_loss(half, half).value()[0] == doctest::Approx(-1.386).epsilon(1e-3));
  Var one = tape.constant(Tensor({4, 1}, 1.0 - 1e-9));
  Var none = tape.constant(Tensor({4, 1}, 1e-9));
  const double near_perfect = -discriminator_loss(one, none).value()[0];
  CHECK(near_perfect < 0.0);
  CHECK(near_perfect > -1e-8);

  // At the clamp floor the gradient stays finite.
  nn::Parameter p{"p", Tensor({2, 1}, 0.0), Tensor({2, 1}, 0.0)};
  nn::Tape t2;
  t2.backward(generator_adversarial_loss(t2.parameter(p)));
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::isfinite(p.grad[i]));
}

TEST_CASE("generator loss components match a straight-line reimplementation") {
  std::mt19937_64 rng(4);
  Model m(small_arch(), {}, 3);
  Tensor x = random_tensor({5, 1, 32}, rng);

  nn::Tape tape;
  EpochTrace tr;
  GeneratorPass g = m.generate(tape, tape.constant(x), nn::Mode::Eval, nn::Binding::Frozen);
  Var loss = m.generator_objective(tape, g, nn::Mode::Eval, &tr);
  auto real = m.discriminate(tape, g.x, nn::Mode::Eval, nn::Binding::Frozen);
  auto fake = m.discriminate(tape, g.x_hat, nn::Mode::Eval, nn::Binding::Frozen);

  const std::size_t n = 5, len = 32, k = 10;
  double rec = 0, fm = 0, sp = 0, adv = 0;
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t j = 0; j < len; ++j) {
      const double d = x[b * len + j] - g.x_hat.value()[b * len + j];
      rec += d * d;
    }
    const std::size_t f = real.features.shape()[1];
    for (std::size_t j = 0; j < f; ++j) {
      const double d = real.features.value()[b * f + j] - fake.features.value()[b * f + j];
      fm += d * d;
    }
    for (std::size_t i = 0; i < k; ++i) sp += std::fabs(g.w.value()[b * k + i]);
    adv -= std::log(std::max(fake.prob.value()[b], 1e-12));
  }
  rec /= n;
  fm /= n;
  sp /= n;
  adv /= n;
  CHECK(tr.rec == doctest::Approx(rec).epsilon(1e-12));
  CHECK(tr.fm == doctest::Approx(fm).epsilon(1e-12));
  CHECK(tr.sp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sp == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(tr.adv == doctest::Approx(adv).epsilon(1e-12));
  CHECK(loss.value()[0] == doctest::Approx(rec + fm + sp + adv).epsilon(1e-12));
  CHECK(tr.rec >= 0);
  CHECK(tr.fm >= 0);

  // Identical input and reconstruction: reconstruction and matching vanish.
  nn::Tape t2;
  Var xs = t2.constant(x);
  CHECK(reconstruction_loss(xs, xs).value()[0] == 0.0);
  auto h = m.discriminate(t2, xs, nn::Mode::Eval, nn::Binding::Frozen).features;
  CHECK(feature_matching_loss(h, h).value()[0] == 0.0);
}

TEST_CASE("finite-difference checks on the micro model") {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({4, 1, 8}, rng);
  const Tensor x_hat = random_tensor({4, 1, 8}, rng);
  nn::GradCheckOptions opt;
  opt.tolerance = 1e-4;
  opt.min_samples = 400;
  // Biases ahead of batchnorm have zero gradient; the loss is O(100) so the
  // difference quotient carries ~1e-10 of rounding noise there.
  opt.floor = 1e-5;

  for (const auto& weights : {LossWeights{}, LossWeights::autoencoder()}) {
    Model m(Architecture::micro(), weights, 21);
    auto report = nn::finite_diff_check(m.generator_parameters(), [&](nn::Tape& t) {
      return m.generator_loss(t, x, nn::Mode::Train);
    }, opt);
    INFO(report.worst_parameter, " ", report.worst_analytic, " vs ", report.worst_numeric);
    CHECK(report.passed);
    CHECK(report.checked > 0);
  }

  Model m(Architecture::micro(), {}, 22);
  auto report = nn::finite_diff_check(m.discriminator_parameters(), [&](nn::Tape& t) {
    Var real = m.discriminate(t, t.constant(x), nn::Mode::Train, nn::Binding::Trainable).prob;
    Var fake = m.discriminate(t, t.constant(x_hat), nn::Mode::Train, nn::Binding::Trainable).prob;
    return discriminator_loss(real, fake);
  }, opt);
  INFO(report.worst_parameter, " ", report.worst_analytic, " vs ", report.worst_numeric);
  CHECK(report.passed);
}

TEST_CASE("shapes and eval determinism") {
  Model m(Architecture::desk(), {}, 1);
  std::vector<double> beat(320);
  for (std::size_t i = 0; i < 320; ++i) beat[i] = std::sin(i * 0.1);
  CHECK(m.encode(beat).size() == 64);
  CHECK(m.encode(beat) == m.encode(beat));
  CHECK(m.reconstruct(beat).size() == 320);
  CHECK(m.reconstruct(beat) == m.reconstruct(beat));
  CHECK(m.score(beat) >= 0.0);
  CHECK(m.memory().value.shape() == nn::Shape{100, 64});
  for (std::size_t k = 0; k < 100; ++k) {
    double norm = 0;
    for (std::size_t j = 0; j < 64; ++j) norm += m.memory().value[k * 64 + j] * m.memory().value[k * 64 + j];
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(m.encode(std::vector<double>(100)), Error);

  Architecture bad = Architecture::desk();
  bad.input_length = 300;  // 300 -> 150 -> 75 -> 37 -> 18 does not mirror back
  CHECK_THROWS_AS(Model(bad, {}, 1), Error);
  CHECK(Architecture::paper().memory_slots == 2000);
}

TEST_CASE("training reduces scores and is reproducible") {
  BeatSet beats = sine_beats(64, 32, 2.0, 1);
  TrainOptions opt;
  opt.epochs = 15;
  opt.batch_size = 16;
  opt.generator_adam.lr = 3e-3;
  opt.discriminator_adam.lr = 3e-3;

  Model a(small_arch(), {}, 9), b(small_arch(), {}, 9);
  auto before = a.scores(beats);
  auto trace = a.train(beats, opt, 5);
  CHECK(trace.size() == 15);
  auto after = a.scores(beats);
  const double mb = std::accumulate(before.begin(), before.end(), 0.0) / beats.size();
  const double ma = std::accumulate(after.begin(), after.end(), 0.0) / beats.size();
  CHECK(ma < mb);

  b.train(beats, opt, 5);
  nn::ParameterSet pa = a.generator_parameters(), pb = b.generator_parameters();
  pa.append(a.discriminator_parameters());
  pb.append(b.discriminator_parameters());
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value == pb[i].value);

  CHECK_THROWS_AS(a.train({}, opt, 1), Error);
  BeatSet poisoned = beats;
  poisoned[3].values[4] = std::nan("");
  try {
    a.train(poisoned, opt, 1);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Divergence);
  }
}

TEST_CASE("overfitting a single repeated beat") {
  BeatSet one = sine_beats(1, 32, 1.0, 3);
  BeatSet repeated(32, one[0]);
  Model m(small_arch(), {}, 2);
  TrainOptions opt;
  opt.epochs = 150;
  opt.batch_size = 16;
  opt.generator_adam.lr = 3e-3;
  opt.discriminator_adam.lr = 3e-3;
  m.train(repeated, opt, 4);
  double norm = 0;
  for (double v : one[0].values) norm += v * v;
  CHECK(m.score(one[0].values) < 0.1 * norm);
}

TEST_CASE("autoencoder ablation") {
  std::mt19937_64 rng(6);
  Model m(small_arch(), LossWeights::autoencoder(), 5);
  const Tensor x = random_tensor({3, 1, 32}, rng);
  nn::Tape tape;
  GeneratorPass g = m.generate(tape, tape.constant(x), nn::Mode::Eval, nn::Binding::Frozen);
  CHECK(g.z_hat.id() == g.z.id());
  EpochTrace tr;
  Var loss = m.generator_objective(tape, g, nn::Mode::Eval, &tr);
  CHECK(loss.value()[0] == reconstruction_loss(g.x, g.x_hat).value()[0]);

  // Training leaves the discriminator untouched.
  std::vector<Tensor> disc_before;
  for (const auto& p : m.discriminator_parameters()) disc_before.push_back(p->value);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch_size = 8;
  m.train(sine_beats(16, 32, 2.0, 1), opt, 1);
  std::size_t i = 0;
  for (const auto& p : m.discriminator_parameters()) CHECK(p->value == disc_before[i++]);
}

TEST_CASE("novelty decisions") {
  Model m(small_arch(), {}, 11);
  BeatSet beats = sine_beats(20, 32, 2.0, 8);
  auto s = m.scores(beats);

  m.set_threshold(s[4]);
  auto dec = m.classify_novelty(beats);
  REQUIRE(dec.size() == 20);
  CHECK_FALSE(dec[4].is_novel);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(dec[i].score == s[i]);
    CHECK(dec[i].is_novel == (s[i] > s[4]));
    // Monotone rescaling of score and threshold together.
    CHECK((std::sqrt(s[i]) > std::sqrt(s[4])) == dec[i].is_novel);
  }

  CHECK(m.calibrate_threshold(beats, 100) == *std::max_element(s.begin(), s.end()));
  for (const auto& d : m.classify_novelty(beats)) CHECK_FALSE(d.is_novel);

  // Reordering memory rows (the weights follow) leaves scores unchanged.
  Model p = m;
  auto& mem = p.memory().value;
  const std::size_t d = mem.dim(1);
  for (std::size_t j = 0; j < d; ++j) std::swap(mem[0 * d + j], mem[7 * d + j]);
  for (std::size_t j = 0; j < d; ++j) std::swap(mem[2 * d + j], mem[5 * d + j]);
  auto sp = p.scores(beats);
  for (std::size_t i = 0; i < 20; ++i) CHECK(sp[i] == doctest::Approx(s[i]).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip") {
  Model m(small_arch(), {}, 12);
  TrainOptions opt;
  opt.epochs = 1;
  opt.batch_size = 8;
  BeatSet beats = sine_beats(16, 32, 2.0, 2);
  m.train(beats, opt, 3);
  m.calibrate_threshold(beats, 95);
  auto bytes = nn::encode_checkpoint(m.to_checkpoint());
  Model r = Model::from_checkpoint(nn::decode_checkpoint(bytes));
  CHECK(r.threshold() == m.threshold());
  CHECK(r.architecture() == m.architecture());
  CHECK(r.loss_weights() == m.loss_weights());
  CHECK(r.scores(beats) == m.scores(beats));
  CHECK(nn::encode_checkpoint(r.to_checkpoint()) == bytes);
}
