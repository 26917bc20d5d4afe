#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "uird/nn/tensor.hpp"

namespace uird::nn {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Non-trainable parameters are buffers (batch-norm running statistics):
  // checkpointed, never touched by the optimizer.
  bool trainable = true;
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
// tape that produced it is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording of one forward computation. A tape is consumed by
// backward(); a second backward() on the same tape throws.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Gradient reaching this node is accumulated into p.grad by backward().
  // Binding the same parameter twice returns the same node.
  Var parameter(Parameter& p);
  // References p.value without tracking gradients.
  Var frozen(const Parameter& p);

  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);

  const Tensor& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient slot of a node, allocated as zeros on first access.
  Tensor& grad(std::size_t id);

  void backward(Var loss, bool retain_param_grads = false);
  bool freed() const { return freed_; }

  // When set, every recorded value is checked and a non-finite entry throws
  // a Divergence error naming the node.
  void set_check_finite(bool on) { check_finite_ = on; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* ref = nullptr;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool freed_ = false;
  bool check_finite_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace uird::nn
