#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uird/beat.hpp"
#include "uird/nn/checkpoint.hpp"
#include "uird/nn/layers.hpp"
#include "uird/nn/optim.hpp"

namespace uird::madegan {

struct Architecture {
  std::size_t input_length = kBeatLength;
  // One conv stage per entry; the decoder mirrors them with tconv stages.
  std::vector<std::size_t> channels{16, 32, 64, 64};
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;
  std::size_t latent_dim = 64;
  std::size_t memory_slots = 100;
  double slope = 0.2;
  bool batchnorm = true;

  static Architecture desk();
  static Architecture paper();
  // length-8 inputs, d_z = 4, K = 3
  static Architecture micro();

  bool operator==(const Architecture&) const = default;
};

struct LossWeights {
  double rec = 1.0;
  double fm = 1.0;
  double sp = 1.0;
  double adv = 1.0;
  // Off: z-hat := z and no sparsity term.
  bool use_memory = true;
  // Off: no discriminator, no feature matching, no adversarial term.
  bool adversarial = true;

  // Plain autoencoder ablation.
  static LossWeights autoencoder();
  bool operator==(const LossWeights&) const = default;
};

struct TrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  nn::AdamOptions generator_adam{};
  nn::AdamOptions discriminator_adam{};
  // Check every recorded value for NaN/Inf (slow).
  bool check_finite = false;
};

struct EpochTrace {
  double generator = 0.0;
  double discriminator = 0.0;
  double rec = 0.0;
  double fm = 0.0;
  double sp = 0.0;
  double adv = 0.0;
};

// ---- Memory addressing on plain vectors -------------------------------------

// softmax over cosine similarity of z with each row of memory (K, d).
std::vector<double> address_memory(std::span<const double> z, const nn::Tensor& memory);
// memory^T w
std::vector<double> retrieve(std::span<const double> w, const nn::Tensor& memory);

// ---- Loss terms on the tape -------------------------------------------------
// Each is averaged over the batch (leading dimension).

nn::Var reconstruction_loss(nn::Var x, nn::Var x_hat);       // mean ||x - x_hat||^2
nn::Var feature_matching_loss(nn::Var hx, nn::Var hx_hat);   // mean ||h(x) - h(x_hat)||^2
nn::Var sparsity_loss(nn::Var w);                            // mean ||w||_1
// -mean[log F(x) + log(1 - F(x_hat))], logs clamped at 1e-12.
nn::Var discriminator_loss(nn::Var p_real, nn::Var p_fake);
// -mean log F(x_hat)
nn::Var generator_adversarial_loss(nn::Var p_fake);

// ||x - x_hat||^2
double squared_error(std::span<const double> x, std::span<const double> x_hat);

// Nearest-rank percentile of `scores` (p in [0, 100]); p = 100 is the max.
double percentile(std::vector<double> scores, double p);

struct GeneratorPass {
  nn::Var x, z, w, z_hat, x_hat;
};

struct DiscriminatorPass {
  nn::Var features;  // flattened last conv stage
  nn::Var prob;      // F(x), (N, 1)
};

struct Novelty {
  double score = 0.0;
  bool is_novel = false;
};

class Model {
 public:
  Model() = default;
  Model(const Architecture& arch, const LossWeights& weights, std::uint64_t seed);

  const Architecture& architecture() const { return arch_; }
  const LossWeights& loss_weights() const { return weights_; }
  double threshold() const { return tau_; }
  void set_threshold(double tau) { tau_ = tau; }

  nn::Sequential& encoder() { return encoder_; }
  nn::Sequential& decoder() { return decoder_; }
  nn::Sequential& discriminator() { return discriminator_; }
  nn::Parameter& memory() { return memory_; }
  const nn::Parameter& memory() const { return memory_; }

  // Encoder, memory and decoder.
  nn::ParameterSet generator_parameters();
  nn::ParameterSet discriminator_parameters();

  GeneratorPass generate(nn::Tape& tape, nn::Var x, nn::Mode mode, nn::Binding binding);
  DiscriminatorPass discriminate(nn::Tape& tape, nn::Var x, nn::Mode mode, nn::Binding binding);

  // L_G on one batch (B, 1, L); the discriminator is bound frozen.
  // Components are written to `trace` when given.
  nn::Var generator_loss(nn::Tape& tape, const nn::Tensor& batch, nn::Mode mode, EpochTrace* trace = nullptr);
  nn::Var generator_objective(nn::Tape& tape, const GeneratorPass& pass, nn::Mode mode, EpochTrace* trace = nullptr);

  // Per-epoch mean losses. Deterministic for a given seed.
  std::vector<EpochTrace> train(const BeatSet& beats, const TrainOptions& options, std::uint64_t seed);

  // Eval-mode latent and reconstruction.
  std::vector<double> encode(std::span<const double> beat) const;
  std::vector<double> reconstruct(std::span<const double> beat) const;
  // ||x - x_hat||^2 per beat.
  std::vector<double> scores(const BeatSet& beats) const;
  double score(std::span<const double> beat) const;

  // Sets tau to the given percentile of held-out scores and returns it.
  double calibrate_threshold(const BeatSet& held_out, double pct = 95.0);
  std::vector<Novelty> classify_novelty(const BeatSet& beats) const;

  nn::Checkpoint to_checkpoint() const;
  static Model from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  std::vector<std::vector<double>> reconstruct_batch(const BeatSet& beats, std::size_t begin, std::size_t end) const;

  Architecture arch_;
  LossWeights weights_;
  nn::Sequential encoder_, decoder_, discriminator_;
  nn::Parameter memory_;
  double tau_ = 0.0;
};

// (B, 1, L) tensor from beats [begin, end).
nn::Tensor batch_tensor(const BeatSet& beats, std::span<const std::size_t> order, std::size_t begin, std::size_t end);

}  // namespace uird::madegan
