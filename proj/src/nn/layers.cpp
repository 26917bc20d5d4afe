#include "uird/nn/layers.hpp"

#include <cmath>

#include "uird/error.hpp"
#include "uird/nn/ops.hpp"

namespace uird::nn {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::TConv1d: return "tconv1d";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::LeakyRelu: return "leaky_relu";
    case LayerKind::Dense: return "dense";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerSpec LayerSpec::conv1d(std::size_t channels, std::size_t kernel, std::size_t stride,
                            std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::Conv1d;
  s.channels = channels;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::tconv1d(std::size_t channels, std::size_t kernel, std::size_t stride,
                             std::size_t padding) {
  LayerSpec s = conv1d(channels, kernel, stride, padding);
  s.kind = LayerKind::TConv1d;
  return s;
}

LayerSpec LayerSpec::batchnorm() {
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  return s;
}

LayerSpec LayerSpec::leaky_relu(double slope) {
  LayerSpec s;
  s.kind = LayerKind::LeakyRelu;
  s.slope = slope;
  return s;
}

LayerSpec LayerSpec::dense(std::size_t features) {
  LayerSpec s;
  s.kind = LayerKind::Dense;
  s.channels = features;
  return s;
}

LayerSpec LayerSpec::flatten(Shape target) {
  LayerSpec s;
  s.kind = LayerKind::Flatten;
  s.target = std::move(target);
  return s;
}

void ParameterSet::append(const ParameterSet& other) {
  items_.insert(items_.end(), other.items_.begin(), other.items_.end());
}

std::size_t ParameterSet::trainable_count() const {
  std::size_t n = 0;
  for (const Parameter* p : items_)
    if (p->trainable) n += p->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (Parameter* p : items_) p->grad = Tensor(p->value.shape(), 0.0);
}

double kaiming_bound(std::size_t fan_in, double slope) {
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  return gain * std::sqrt(3.0 / static_cast<double>(fan_in));
}

void kaiming_uniform(Tensor& t, std::size_t fan_in, double slope, Rng& rng) {
  const double bound = kaiming_bound(fan_in, slope);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

namespace {

void uniform_bias(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.data()) v = dist(rng);
}

void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::Validation, what);
}

}  // namespace

int Sequential::add_param(const std::string& label, std::size_t layer, Tensor value,
                          bool trainable) {
  Parameter p;
  p.name = name_ + "." + std::to_string(layer) + "." + label;
  p.grad = Tensor(value.shape(), 0.0);
  p.value = std::move(value);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size() - 1);
}

Sequential::Sequential(std::string name, Shape input_shape, std::vector<LayerSpec> specs,
                       std::uint64_t seed)
    : name_(std::move(name)), input_shape_(std::move(input_shape)), specs_(std::move(specs)) {
  Rng rng(seed);
  Shape cur = input_shape_;
  // Slope used for init gain: the slope of the activation that follows, if any.
  auto next_slope = [&](std::size_t i) {
    for (std::size_t j = i + 1; j < specs_.size(); ++j) {
      if (specs_[j].kind == LayerKind::LeakyRelu) return specs_[j].slope;
      if (specs_[j].kind == LayerKind::Conv1d || specs_[j].kind == LayerKind::TConv1d ||
          specs_[j].kind == LayerKind::Dense)
        break;
    }
    return 0.2;
  };

  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const LayerSpec& s = specs_[i];
    Layer layer;
    layer.spec = s;
    layer.in = cur;
    const std::string where = name_ + " layer " + std::to_string(i) + " (" + to_string(s.kind) + ")";
    switch (s.kind) {
      case LayerKind::Conv1d:
      case LayerKind::TConv1d: {
        require(cur.size() == 2, where + ": needs (C, L) input, got " + to_string(cur));
        require(s.channels > 0 && s.kernel > 0 && s.stride > 0,
                where + ": channels, kernel and stride must be positive");
        const std::size_t cin = cur[0], len = cur[1];
        std::size_t lout = 0;
        Tensor w;
        std::size_t fan_in = 0;
        if (s.kind == LayerKind::Conv1d) {
          lout = conv1d_output_length(len, s.kernel, s.stride, s.padding);
          w = Tensor({s.channels, cin, s.kernel});
          fan_in = cin * s.kernel;
        } else {
          lout = tconv1d_output_length(len, s.kernel, s.stride, s.padding);
          w = Tensor({cin, s.channels, s.kernel});
          fan_in = s.channels * s.kernel;
        }
        kaiming_uniform(w, fan_in, next_slope(i), rng);
        Tensor b({s.channels});
        uniform_bias(b, fan_in, rng);
        layer.weight = add_param("weight", i, std::move(w), true);
        layer.bias = add_param("bias", i, std::move(b), true);
        cur = {s.channels, lout};
        break;
      }
      case LayerKind::BatchNorm: {
        require(!cur.empty() && cur.size() <= 2, where + ": needs (C, L) or (F) input");
        const std::size_t c = cur[0];
        layer.gamma = add_param("gamma", i, Tensor({c}, 1.0), true);
        layer.beta = add_param("beta", i, Tensor({c}, 0.0), true);
        layer.running_mean = add_param("running_mean", i, Tensor({c}, 0.0), false);
        layer.running_var = add_param("running_var", i, Tensor({c}, 1.0), false);
        break;
      }
      case LayerKind::LeakyRelu:
        require(s.slope > 0.0 && s.slope < 1.0, where + ": slope must be in (0, 1)");
        break;
      case LayerKind::Dense: {
        require(cur.size() == 1, where + ": needs flat input, got " + to_string(cur));
        require(s.channels > 0, where + ": features must be positive");
        Tensor w({s.channels, cur[0]});
        kaiming_uniform(w, cur[0], next_slope(i), rng);
        Tensor b({s.channels});
        uniform_bias(b, cur[0], rng);
        layer.weight = add_param("weight", i, std::move(w), true);
        layer.bias = add_param("bias", i, std::move(b), true);
        cur = {s.channels};
        break;
      }
      case LayerKind::Flatten: {
        const std::size_t n = numel(cur);
        if (s.target.empty()) {
          cur = {n};
        } else {
          require(numel(s.target) == n, where + ": cannot reshape " + to_string(cur) + " to " +
                                            to_string(s.target));
          cur = s.target;
        }
        break;
      }
    }
    layer.out = cur;
    layers_.push_back(std::move(layer));
  }
}

const Shape& Sequential::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back().out;
}

Var Sequential::forward(Tape& tape, Var x, Mode mode, Binding binding,
                        std::vector<Var>* activations) {
  return run(tape, x, mode, binding, activations);
}

Var Sequential::forward(Tape& tape, Var x) const {
  // Eval + frozen never mutates the network.
  return const_cast<Sequential*>(this)->run(tape, x, Mode::Eval, Binding::Frozen, nullptr);
}

Var Sequential::run(Tape& tape, Var x, Mode mode, Binding binding, std::vector<Var>* activations) {
  const Shape& xs = x.shape();
  if (xs.empty() || Shape(xs.begin() + 1, xs.end()) != input_shape_) {
    fail(ErrorKind::Shape, name_ + ": input " + to_string(xs) + " does not match per-sample shape " +
                               to_string(input_shape_));
  }
  const std::size_t batch = xs[0];
  auto bind = [&](int idx) -> Var {
    if (idx < 0) return Var();
    Parameter& p = params_[static_cast<std::size_t>(idx)];
    return binding == Binding::Trainable ? tape.parameter(p) : tape.frozen(p);
  };

  Var h = x;
  for (Layer& layer : layers_) {
    const LayerSpec& s = layer.spec;
    switch (s.kind) {
      case LayerKind::Conv1d:
        h = conv1d(h, bind(layer.weight), bind(layer.bias), s.stride, s.padding);
        break;
      case LayerKind::TConv1d:
        h = tconv1d(h, bind(layer.weight), bind(layer.bias), s.stride, s.padding);
        break;
      case LayerKind::BatchNorm: {
        BatchNormBuffers buf;
        buf.running_mean = &params_[static_cast<std::size_t>(layer.running_mean)].value;
        buf.running_var = &params_[static_cast<std::size_t>(layer.running_var)].value;
        h = batchnorm(h, bind(layer.gamma), bind(layer.beta), buf, mode == Mode::Train);
        break;
      }
      case LayerKind::LeakyRelu:
        h = leaky_relu(h, s.slope);
        break;
      case LayerKind::Dense:
        h = dense(h, bind(layer.weight), bind(layer.bias));
        break;
      case LayerKind::Flatten: {
        Shape target{batch};
        target.insert(target.end(), layer.out.begin(), layer.out.end());
        h = reshape(h, std::move(target));
        break;
      }
    }
    if (activations) activations->push_back(h);
  }
  return h;
}

ParameterSet Sequential::parameters() {
  ParameterSet set;
  for (Parameter& p : params_) set.add(p);
  return set;
}

std::vector<const Parameter*> Sequential::parameters() const {
  std::vector<const Parameter*> out;
  for (const Parameter& p : params_) out.push_back(&p);
  return out;
}

void Sequential::resize_output(std::size_t features, std::uint64_t seed) {
  if (layers_.empty() || layers_.back().spec.kind != LayerKind::Dense) {
    fail(ErrorKind::Validation, name_ + ": resize_output needs a trailing dense layer");
  }
  Layer& last = layers_.back();
  Parameter& w = params_[static_cast<std::size_t>(last.weight)];
  Parameter& b = params_[static_cast<std::size_t>(last.bias)];
  const std::size_t in = w.value.dim(1), old = w.value.dim(0);

  Rng rng(seed);
  Tensor nw({features, in});
  kaiming_uniform(nw, in, 0.2, rng);
  Tensor nb({features});
  uniform_bias(nb, in, rng);
  const std::size_t keep = std::min(old, features);
  for (std::size_t i = 0; i < keep * in; ++i) nw[i] = w.value[i];
  for (std::size_t i = 0; i < keep; ++i) nb[i] = b.value[i];

  w.value = std::move(nw);
  w.grad = Tensor(w.value.shape(), 0.0);
  b.value = std::move(nb);
  b.grad = Tensor(b.value.shape(), 0.0);
  last.spec.channels = features;
  last.out = {features};
  specs_.back().channels = features;
}

}  // namespace uird::nn
