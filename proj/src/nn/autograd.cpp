#include "uird/nn/autograd.hpp"

#include "uird/error.hpp"

namespace uird::nn {

Var Tape::push(Node node) {
  if (freed_) fail(ErrorKind::Runtime, "cannot record on a tape after backward()");
  if (check_finite_) {
    const Tensor& v = node.ref ? *node.ref : node.value;
    if (!v.all_finite()) {
      fail(ErrorKind::Divergence,
           "non-finite value at tape node " + std::to_string(nodes_.size()));
    }
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end() && nodes_[it->second].param) {
    return Var(this, it->second);
  }
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.requires_grad = true;
  Var v = push(std::move(n));
  bound_[&p] = v.id();
  return v;
}

Var Tape::frozen(const Parameter& p) {
  Node n;
  n.ref = &p.value;
  return push(std::move(n));
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) {
    if (&p.tape() != this) fail(ErrorKind::Runtime, "operand belongs to a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.value;
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(value(id).shape(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss, bool retain_param_grads) {
  if (freed_) fail(ErrorKind::Runtime, "backward() through a graph that was already freed");
  if (&loss.tape() != this) fail(ErrorKind::Runtime, "loss belongs to a different tape");
  if (loss.value().size() != 1) {
    fail(ErrorKind::Shape, "backward() needs a scalar loss, got " + to_string(loss.shape()));
  }

  for (Node& n : nodes_) {
    if (!n.param) continue;
    Parameter& p = *n.param;
    if (!retain_param_grads || p.grad.shape() != p.value.shape()) {
      p.grad = Tensor(p.value.shape(), 0.0);
    }
  }

  if (nodes_[loss.id()].requires_grad) {
    grad(loss.id())[0] = 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, id);
    }
  }

  for (Node& n : nodes_) {
    if (!n.param || n.grad.empty()) continue;
    double* dst = n.param->grad.ptr();
    const double* src = n.grad.ptr();
    for (std::size_t i = 0; i < n.grad.size(); ++i) dst[i] += src[i];
  }

  freed_ = true;
  for (Node& n : nodes_) {
    n.backward = nullptr;
    n.grad = Tensor();
  }
}

}  // namespace uird::nn
