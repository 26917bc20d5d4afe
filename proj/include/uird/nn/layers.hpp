#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "uird/nn/autograd.hpp"
#include "uird/rng.hpp"

namespace uird::nn {

enum class LayerKind { Conv1d, TConv1d, BatchNorm, LeakyRelu, Dense, Flatten };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Flatten;
  std::size_t channels = 0;  // output channels (conv/tconv) or output features (dense)
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double slope = 0.2;
  // Flatten with a non-empty target reshapes each sample to this shape
  // instead of to a flat vector (used to lift a latent into (C, L)).
  Shape target;

  static LayerSpec conv1d(std::size_t channels, std::size_t kernel, std::size_t stride,
                          std::size_t padding);
  static LayerSpec tconv1d(std::size_t channels, std::size_t kernel, std::size_t stride,
                           std::size_t padding);
  static LayerSpec batchnorm();
  static LayerSpec leaky_relu(double slope);
  static LayerSpec dense(std::size_t features);
  static LayerSpec flatten(Shape target = {});

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

enum class Mode { Train, Eval };
enum class Binding { Trainable, Frozen };

// Ordered view over parameters owned by one or more networks.
class ParameterSet {
 public:
  void add(Parameter& p) { items_.push_back(&p); }
  void append(const ParameterSet& other);

  std::size_t size() const { return items_.size(); }
  Parameter& operator[](std::size_t i) { return *items_[i]; }
  const Parameter& operator[](std::size_t i) const { return *items_[i]; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  // Number of trainable scalar entries.
  std::size_t trainable_count() const;
  void zero_grad();

 private:
  std::vector<Parameter*> items_;
};

// A feed-forward stack of layers with per-sample input shape (C, L) or (F).
// Owns its parameters by value, so copies are independent networks.
class Sequential {
 public:
  Sequential() = default;
  Sequential(std::string name, Shape input_shape, std::vector<LayerSpec> specs,
             std::uint64_t seed);

  // Training mode uses batch statistics and updates running statistics.
  // When `activations` is non-null it receives every layer's output.
  Var forward(Tape& tape, Var x, Mode mode, Binding binding = Binding::Trainable,
              std::vector<Var>* activations = nullptr);
  // Eval mode, frozen parameters.
  Var forward(Tape& tape, Var x) const;

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t layer_count() const { return layers_.size(); }
  // Per-sample shape after layer i.
  const Shape& layer_output_shape(std::size_t i) const { return layers_.at(i).out; }
  const std::string& name() const { return name_; }

  ParameterSet parameters();
  std::vector<const Parameter*> parameters() const;

  // Replaces rows of the last dense layer's weight/bias. Used to widen an
  // output head: existing rows keep their values, new rows are initialized.
  void resize_output(std::size_t features, std::uint64_t seed);

 private:
  struct Layer {
    LayerSpec spec;
    Shape in, out;
    int weight = -1, bias = -1, gamma = -1, beta = -1, running_mean = -1, running_var = -1;
  };

  Var run(Tape& tape, Var x, Mode mode, Binding binding, std::vector<Var>* activations);
  int add_param(const std::string& label, std::size_t layer, Tensor value, bool trainable);

  std::string name_;
  Shape input_shape_;
  std::vector<LayerSpec> specs_;
  std::vector<Layer> layers_;
  std::vector<Parameter> params_;
};

// Kaiming-uniform bound for a LeakyReLU network: gain * sqrt(3 / fan_in).
double kaiming_bound(std::size_t fan_in, double slope);
void kaiming_uniform(Tensor& t, std::size_t fan_in, double slope, Rng& rng);

}  // namespace uird::nn
