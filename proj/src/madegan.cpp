#include "uird/madegan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "uird/error.hpp"
#include "uird/io.hpp"
#include "uird/nn/ops.hpp"
#include "uird/rng.hpp"

namespace uird::madegan {

using nn::LayerSpec;
using nn::Tensor;
using nn::Var;

namespace {

constexpr std::size_t kScoreBatch = 64;

enum Purpose : std::uint64_t { kEncoder = 1, kDecoder, kDiscriminator, kMemory, kShuffle };

void validate(const Architecture& a) {
  if (a.channels.empty()) fail(ErrorKind::Validation, "madegan: need at least one conv stage");
  if (a.latent_dim == 0 || a.memory_slots == 0) fail(ErrorKind::Validation, "madegan: latent_dim and memory_slots must be positive");
  if (a.kernel == 0 || a.stride == 0) fail(ErrorKind::Validation, "madegan: kernel and stride must be positive");
  if (!(a.slope > 0.0 && a.slope < 1.0)) fail(ErrorKind::Validation, "madegan: slope must lie in (0, 1)");
  for (std::size_t c : a.channels) {
    if (c == 0) fail(ErrorKind::Validation, "madegan: zero-width conv stage");
  }
}

std::vector<LayerSpec> conv_trunk(const Architecture& a) {
  std::vector<LayerSpec> s;
  for (std::size_t c : a.channels) {
    s.push_back(LayerSpec::conv1d(c, a.kernel, a.stride, a.padding));
    if (a.batchnorm) s.push_back(LayerSpec::batchnorm());
    s.push_back(LayerSpec::leaky_relu(a.slope));
  }
  return s;
}

// Per-stage lengths through the encoder, input first.
std::vector<std::size_t> stage_lengths(const Architecture& a) {
  std::vector<std::size_t> len{a.input_length};
  for (std::size_t i = 0; i < a.channels.size(); ++i)
    len.push_back(nn::conv1d_output_length(len.back(), a.kernel, a.stride, a.padding));
  return len;
}

nn::Sequential build_encoder(const Architecture& a, std::uint64_t seed) {
  auto specs = conv_trunk(a);
  specs.push_back(LayerSpec::flatten());
  specs.push_back(LayerSpec::dense(a.latent_dim));
  return nn::Sequential("encoder", {1, a.input_length}, specs, seed);
}

nn::Sequential build_decoder(const Architecture& a, std::uint64_t seed) {
  const auto len = stage_lengths(a);
  const std::size_t top = a.channels.size();
  std::vector<LayerSpec> s;
  s.push_back(LayerSpec::dense(a.channels.back() * len[top]));
  s.push_back(LayerSpec::leaky_relu(a.slope));
  s.push_back(LayerSpec::flatten({a.channels.back(), len[top]}));
  // Mirror: stage i maps channels[i] at len[i+1] back to channels[i-1] at len[i].
  for (std::size_t i = top; i-- > 0;) {
    const std::size_t out_ch = i == 0 ? 1 : a.channels[i - 1];
    s.push_back(LayerSpec::tconv1d(out_ch, a.kernel, a.stride, a.padding));
    if (i == 0) break;
    if (a.batchnorm) s.push_back(LayerSpec::batchnorm());
    s.push_back(LayerSpec::leaky_relu(a.slope));
  }
  nn::Sequential dec("decoder", {a.latent_dim}, s, seed);
  if (dec.output_shape() != nn::Shape{1, a.input_length}) {
    fail(ErrorKind::Validation, "madegan: decoder output " + nn::to_string(dec.output_shape()) +
                                    " does not mirror the input length " + std::to_string(a.input_length));
  }
  return dec;
}

nn::Sequential build_discriminator(const Architecture& a, std::uint64_t seed) {
  auto specs = conv_trunk(a);
  specs.push_back(LayerSpec::flatten());
  specs.push_back(LayerSpec::dense(1));
  return nn::Sequential("discriminator", {1, a.input_length}, specs, seed);
}

Var batch_sum_mean(Var per_batch_total, std::size_t n) { return nn::scale(per_batch_total, 1.0 / static_cast<double>(n)); }

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> split_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  return out;
}

double parse_meta_double(const nn::Checkpoint& c, const std::string& key) {
  double v = 0.0;
  if (!parse_double(c.meta(key), v)) fail(ErrorKind::Parse, "madegan checkpoint: bad value for " + key);
  return v;
}

}  // namespace

Architecture Architecture::desk() { return {}; }

Architecture Architecture::paper() {
  Architecture a;
  a.channels = {64, 128, 256, 512};
  a.latent_dim = 512;
  a.memory_slots = 2000;
  return a;
}

Architecture Architecture::micro() {
  Architecture a;
  a.input_length = 8;
  a.channels = {2, 2};
  a.latent_dim = 4;
  a.memory_slots = 3;
  return a;
}

LossWeights LossWeights::autoencoder() {
  LossWeights w;
  w.fm = 0.0;
  w.sp = 0.0;
  w.adv = 0.0;
  w.use_memory = false;
  w.adversarial = false;
  return w;
}

std::vector<double> address_memory(std::span<const double> z, const Tensor& memory) {
  if (memory.rank() != 2 || memory.dim(1) != z.size()) fail(ErrorKind::Shape, "address_memory: memory must be (K, d)");
  nn::Tape tape;
  Var zv = tape.constant(Tensor({1, z.size()}, std::vector<double>(z.begin(), z.end())));
  Var w = nn::softmax_rows(nn::cosine_similarity(zv, tape.constant(memory)));
  return w.value().vec();
}

std::vector<double> retrieve(std::span<const double> w, const Tensor& memory) {
  if (memory.rank() != 2 || memory.dim(0) != w.size()) fail(ErrorKind::Shape, "retrieve: weights must have one entry per slot");
  nn::Tape tape;
  Var wv = tape.constant(Tensor({1, w.size()}, std::vector<double>(w.begin(), w.end())));
  return nn::matmul(wv, tape.constant(memory)).value().vec();
}

Var reconstruction_loss(Var x, Var x_hat) {
  return batch_sum_mean(nn::sum(nn::square(nn::sub(x, x_hat))), x.shape()[0]);
}

Var feature_matching_loss(Var hx, Var hx_hat) {
  return batch_sum_mean(nn::sum(nn::square(nn::sub(hx, hx_hat))), hx.shape()[0]);
}

Var sparsity_loss(Var w) { return batch_sum_mean(nn::sum(nn::abs(w)), w.shape()[0]); }

Var discriminator_loss(Var p_real, Var p_fake) {
  Var real = nn::log_clamped(p_real);
  Var fake = nn::log_clamped(nn::add_scalar(nn::scale(p_fake, -1.0), 1.0));
  return nn::scale(nn::add(nn::sum(real), nn::sum(fake)), -1.0 / static_cast<double>(p_real.shape()[0]));
}

Var generator_adversarial_loss(Var p_fake) {
  return nn::scale(nn::sum(nn::log_clamped(p_fake)), -1.0 / static_cast<double>(p_fake.shape()[0]));
}

double squared_error(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) fail(ErrorKind::Shape, "squared_error: length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) s += (x[j] - x_hat[j]) * (x[j] - x_hat[j]);
  return s;
}

double percentile(std::vector<double> scores, double p) {
  if (scores.empty()) fail(ErrorKind::Validation, "percentile of an empty score set");
  if (!(p >= 0.0 && p <= 100.0)) fail(ErrorKind::Validation, "percentile must lie in [0, 100]");
  std::sort(scores.begin(), scores.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(scores.size()));
  const std::size_t idx = rank < 1.0 ? 0 : std::min(scores.size() - 1, static_cast<std::size_t>(rank) - 1);
  return scores[idx];
}

Tensor batch_tensor(const BeatSet& beats, std::span<const std::size_t> order, std::size_t begin, std::size_t end) {
  const std::size_t len = beats[order[begin]].values.size();
  Tensor t({end - begin, 1, len});
  for (std::size_t i = begin; i < end; ++i) {
    const auto& v = beats[order[i]].values;
    if (v.size() != len) fail(ErrorKind::Shape, "beats differ in length");
    std::copy(v.begin(), v.end(), t.ptr() + (i - begin) * len);
  }
  return t;
}

Model::Model(const Architecture& arch, const LossWeights& weights, std::uint64_t seed) : arch_(arch), weights_(weights) {
  validate(arch);
  encoder_ = build_encoder(arch, derive_seed(seed, 0, kEncoder));
  decoder_ = build_decoder(arch, derive_seed(seed, 0, kDecoder));
  discriminator_ = build_discriminator(arch, derive_seed(seed, 0, kDiscriminator));

  memory_.name = "memory";
  memory_.value = Tensor({arch.memory_slots, arch.latent_dim});
  memory_.grad = Tensor(memory_.value.shape(), 0.0);
  Rng rng(derive_seed(seed, 0, kMemory));
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t k = 0; k < arch.memory_slots; ++k) {
    double* row = memory_.value.ptr() + k * arch.latent_dim;
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t j = 0; j < arch.latent_dim; ++j) {
        row[j] = g(rng);
        norm += row[j] * row[j];
      }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < arch.latent_dim; ++j) row[j] /= norm;
  }
}

nn::ParameterSet Model::generator_parameters() {
  nn::ParameterSet set = encoder_.parameters();
  set.add(memory_);
  set.append(decoder_.parameters());
  return set;
}

nn::ParameterSet Model::discriminator_parameters() { return discriminator_.parameters(); }

GeneratorPass Model::generate(nn::Tape& tape, Var x, nn::Mode mode, nn::Binding binding) {
  GeneratorPass g;
  g.x = x;
  g.z = encoder_.forward(tape, x, mode, binding);
  if (weights_.use_memory) {
    Var m = binding == nn::Binding::Trainable ? tape.parameter(memory_) : tape.frozen(memory_);
    g.w = nn::softmax_rows(nn::cosine_similarity(g.z, m));
    g.z_hat = nn::matmul(g.w, m);
  } else {
    g.z_hat = g.z;
  }
  g.x_hat = decoder_.forward(tape, g.z_hat, mode, binding);
  return g;
}

DiscriminatorPass Model::discriminate(nn::Tape& tape, Var x, nn::Mode mode, nn::Binding binding) {
  std::vector<Var> acts;
  Var logit = discriminator_.forward(tape, x, mode, binding, &acts);
  return {acts[acts.size() - 2], nn::sigmoid(logit)};
}

Var Model::generator_loss(nn::Tape& tape, const Tensor& batch, nn::Mode mode, EpochTrace* trace) {
  return generator_objective(tape, generate(tape, tape.constant(batch), mode, nn::Binding::Trainable), mode, trace);
}

Var Model::generator_objective(nn::Tape& tape, const GeneratorPass& g, nn::Mode mode, EpochTrace* trace) {
  Var rec = reconstruction_loss(g.x, g.x_hat);
  Var loss = nn::scale(rec, weights_.rec);
  if (trace) trace->rec = rec.value()[0];
  if (weights_.use_memory && weights_.sp != 0.0) {
    Var sp = sparsity_loss(g.w);
    if (trace) trace->sp = sp.value()[0];
    loss = nn::add(loss, nn::scale(sp, weights_.sp));
  }
  if (weights_.adversarial) {
    DiscriminatorPass real = discriminate(tape, g.x, mode, nn::Binding::Frozen);
    DiscriminatorPass fake = discriminate(tape, g.x_hat, mode, nn::Binding::Frozen);
    Var fm = feature_matching_loss(real.features, fake.features);
    Var adv = generator_adversarial_loss(fake.prob);
    if (trace) {
      trace->fm = fm.value()[0];
      trace->adv = adv.value()[0];
    }
    loss = nn::add(loss, nn::add(nn::scale(fm, weights_.fm), nn::scale(adv, weights_.adv)));
  }
  if (trace) trace->generator = loss.value()[0];
  return loss;
}

std::vector<EpochTrace> Model::train(const BeatSet& beats, const TrainOptions& options, std::uint64_t seed) {
  if (beats.empty()) fail(ErrorKind::Validation, "madegan: empty training set");
  if (options.batch_size == 0) fail(ErrorKind::Validation, "madegan: batch_size must be positive");
  for (const Beat& b : beats) {
    if (b.values.size() != arch_.input_length)
      fail(ErrorKind::Shape, "madegan: beat length " + std::to_string(b.values.size()) + " does not match model input " +
                                 std::to_string(arch_.input_length));
  }
  nn::Adam g_opt(options.generator_adam), d_opt(options.discriminator_adam);
  nn::ParameterSet g_params = generator_parameters();
  nn::ParameterSet d_params = discriminator_parameters();
  Rng rng(derive_seed(seed, 0, kShuffle));
  std::vector<std::size_t> order(beats.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochTrace> trace;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochTrace sum;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      std::size_t end = std::min(order.size(), begin + options.batch_size);
      // A lone trailing sample gives degenerate batch statistics; fold it in.
      if (order.size() - end == 1) end = order.size();
      const Tensor x = batch_tensor(beats, order, begin, end);

      nn::Tape g_tape;
      g_tape.set_check_finite(options.check_finite);
      EpochTrace step;
      const GeneratorPass g = generate(g_tape, g_tape.constant(x), nn::Mode::Train, nn::Binding::Trainable);
      if (weights_.adversarial) {
        // Discriminator step on the detached reconstructions; the generator
        // objective below then sees the updated discriminator.
        const Tensor x_hat = g.x_hat.value();
        nn::Tape d_tape;
        d_tape.set_check_finite(options.check_finite);
        Var real = discriminate(d_tape, d_tape.constant(x), nn::Mode::Train, nn::Binding::Trainable).prob;
        Var fake = discriminate(d_tape, d_tape.constant(x_hat), nn::Mode::Train, nn::Binding::Trainable).prob;
        Var ld = discriminator_loss(real, fake);
        step.discriminator = ld.value()[0];
        if (!std::isfinite(step.discriminator))
          fail(ErrorKind::Divergence, "madegan: discriminator loss became non-finite at epoch " + std::to_string(epoch));
        d_tape.backward(ld);
        d_opt.step(d_params);
      }
      Var lg = generator_objective(g_tape, g, nn::Mode::Train, &step);
      if (!std::isfinite(step.generator))
        fail(ErrorKind::Divergence, "madegan: generator loss became non-finite at epoch " + std::to_string(epoch) +
                                        ", batch " + std::to_string(batches));
      g_tape.backward(lg);
      g_opt.step(g_params);

      sum.generator += step.generator;
      sum.discriminator += step.discriminator;
      sum.rec += step.rec;
      sum.fm += step.fm;
      sum.sp += step.sp;
      sum.adv += step.adv;
      ++batches;
      if (end == order.size()) break;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, batches));
    trace.push_back({sum.generator / n, sum.discriminator / n, sum.rec / n, sum.fm / n, sum.sp / n, sum.adv / n});
  }
  return trace;
}

std::vector<std::vector<double>> Model::reconstruct_batch(const BeatSet& beats, std::size_t begin, std::size_t end) const {
  std::vector<std::size_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  const Tensor x = batch_tensor(beats, order, 0, order.size());
  if (x.dim(2) != arch_.input_length) fail(ErrorKind::Shape, "madegan: beat length does not match model input");
  nn::Tape tape;
  Var z = encoder_.forward(tape, tape.constant(x));
  Var z_hat = z;
  if (weights_.use_memory) {
    Var m = tape.frozen(memory_);
    z_hat = nn::matmul(nn::softmax_rows(nn::cosine_similarity(z, m)), m);
  }
  const Tensor& xh = decoder_.forward(tape, z_hat).value();
  std::vector<std::vector<double>> out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    out[i].assign(xh.ptr() + i * arch_.input_length, xh.ptr() + (i + 1) * arch_.input_length);
  return out;
}

std::vector<double> Model::encode(std::span<const double> beat) const {
  if (beat.size() != arch_.input_length) fail(ErrorKind::Shape, "madegan: beat length does not match model input");
  nn::Tape tape;
  Var x = tape.constant(Tensor({1, 1, beat.size()}, std::vector<double>(beat.begin(), beat.end())));
  return encoder_.forward(tape, x).value().vec();
}

std::vector<double> Model::reconstruct(std::span<const double> beat) const {
  BeatSet one(1);
  one[0].values.assign(beat.begin(), beat.end());
  return reconstruct_batch(one, 0, 1)[0];
}

std::vector<double> Model::scores(const BeatSet& beats) const {
  std::vector<double> out;
  out.reserve(beats.size());
  for (std::size_t begin = 0; begin < beats.size(); begin += kScoreBatch) {
    const std::size_t end = std::min(beats.size(), begin + kScoreBatch);
    auto rec = reconstruct_batch(beats, begin, end);
    for (std::size_t i = begin; i < end; ++i) out.push_back(squared_error(beats[i].values, rec[i - begin]));
  }
  return out;
}

double Model::score(std::span<const double> beat) const {
  BeatSet one(1);
  one[0].values.assign(beat.begin(), beat.end());
  return scores(one)[0];
}

double Model::calibrate_threshold(const BeatSet& held_out, double pct) {
  tau_ = percentile(scores(held_out), pct);
  return tau_;
}

std::vector<Novelty> Model::classify_novelty(const BeatSet& beats) const {
  std::vector<Novelty> out;
  for (double s : scores(beats)) out.push_back({s, s > tau_});
  return out;
}

nn::Checkpoint Model::to_checkpoint() const {
  nn::Checkpoint c;
  c.metadata["kind"] = "madegan";
  c.metadata["input_length"] = std::to_string(arch_.input_length);
  c.metadata["channels"] = join(arch_.channels);
  c.metadata["kernel"] = std::to_string(arch_.kernel);
  c.metadata["stride"] = std::to_string(arch_.stride);
  c.metadata["padding"] = std::to_string(arch_.padding);
  c.metadata["latent_dim"] = std::to_string(arch_.latent_dim);
  c.metadata["memory_slots"] = std::to_string(arch_.memory_slots);
  c.metadata["slope"] = format_double(arch_.slope);
  c.metadata["batchnorm"] = arch_.batchnorm ? "1" : "0";
  c.metadata["lambda_rec"] = format_double(weights_.rec);
  c.metadata["lambda_fm"] = format_double(weights_.fm);
  c.metadata["lambda_sp"] = format_double(weights_.sp);
  c.metadata["lambda_adv"] = format_double(weights_.adv);
  c.metadata["use_memory"] = weights_.use_memory ? "1" : "0";
  c.metadata["adversarial"] = weights_.adversarial ? "1" : "0";
  c.metadata["threshold"] = format_double(tau_);
  auto add = [&](const nn::Sequential& net) {
    for (const nn::Parameter* p : net.parameters()) c.tensors.emplace_back(p->name, p->value);
  };
  add(encoder_);
  c.tensors.emplace_back(memory_.name, memory_.value);
  add(decoder_);
  add(discriminator_);
  return c;
}

Model Model::from_checkpoint(const nn::Checkpoint& c) {
  if (c.meta("kind") != "madegan") fail(ErrorKind::Parse, "checkpoint is not a MadeGAN model");
  Architecture a;
  a.input_length = std::stoul(c.meta("input_length"));
  a.channels = split_sizes(c.meta("channels"));
  a.kernel = std::stoul(c.meta("kernel"));
  a.stride = std::stoul(c.meta("stride"));
  a.padding = std::stoul(c.meta("padding"));
  a.latent_dim = std::stoul(c.meta("latent_dim"));
  a.memory_slots = std::stoul(c.meta("memory_slots"));
  a.slope = parse_meta_double(c, "slope");
  a.batchnorm = c.meta("batchnorm") == "1";
  LossWeights w;
  w.rec = parse_meta_double(c, "lambda_rec");
  w.fm = parse_meta_double(c, "lambda_fm");
  w.sp = parse_meta_double(c, "lambda_sp");
  w.adv = parse_meta_double(c, "lambda_adv");
  w.use_memory = c.meta("use_memory") == "1";
  w.adversarial = c.meta("adversarial") == "1";
  Model m(a, w, 0);
  nn::ParameterSet all = m.generator_parameters();
  all.append(m.discriminator_parameters());
  nn::import_parameters(all, c);
  m.tau_ = parse_meta_double(c, "threshold");
  return m;
}

}  // namespace uird::madegan
