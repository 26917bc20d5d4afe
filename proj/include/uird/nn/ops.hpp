#pragma once

#include <cstddef>
#include <span>

#include "uird/nn/autograd.hpp"

namespace uird::nn {

// Elementwise; operands must have identical shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var square(Var a);
Var abs(Var a);
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);
// Gradient-blocking copy of a's value.
Var detach(Var a);

Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
// log(max(a, floor)); gradient is zero where the floor is active.
Var log_clamped(Var a, double floor = 1e-12);

// x: (N, in), weight: (out, in), bias: (out) or an invalid Var.
Var dense(Var x, Var weight, Var bias);

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);
std::size_t tconv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                  std::size_t padding);

// Cross-correlation. x: (N, C_in, L), weight: (C_out, C_in, k), bias: (C_out).
Var conv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding);
// Adjoint of conv1d sharing its weight layout: x: (N, C_in, L) with
// weight (C_in, C_out, k) produces (N, C_out, (L-1)*stride - 2*padding + k).
Var tconv1d(Var x, Var weight, Var bias, std::size_t stride, std::size_t padding);

struct BatchNormBuffers {
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  double momentum = 0.9;  // weight on the previous running value
  double eps = 1e-5;
};

// Per-channel normalization of (N, C, L) or per-feature of (N, F).
// Training mode uses batch statistics and, when buffers are given, updates
// the running statistics; eval mode reads them.
Var batchnorm(Var x, Var gamma, Var beta, const BatchNormBuffers& buffers, bool training);

// Pairwise cosine similarity of rows: z (N, d), m (K, d) -> (N, K).
// A zero-norm row yields similarity 0 with zero gradient.
Var cosine_similarity(Var z, Var m);
Var softmax_rows(Var a);
// (N, K) x (K, d) -> (N, d)
Var matmul(Var a, Var b);

// Mean over the batch of -log softmax(logits)[target]. If probabilities is
// non-null it receives the (N, C) softmax.
Var softmax_cross_entropy(Var logits, std::span<const int> targets,
                          Tensor* probabilities = nullptr);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

}  // namespace uird::nn
