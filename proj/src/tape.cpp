#include "gelgt/tape.hpp"

#include "gelgt/errors.hpp"

namespace gelgt {

const Tensor& Var::value() const {
  return tape_->value(id_);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  if (grad_enabled_) {
    n.requires_grad = true;
    n.param = &p;
  }
  Var v = push(std::move(n));
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (const Var& p : parents) n.requires_grad = n.requires_grad || nodes_[p.id()].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

Tensor* Tape::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    if (n.grad.same_shape(n.value)) {
      n.grad.fill(0.0);
    } else {
      n.grad = Tensor(n.value.shape());
    }
    n.has_grad = true;
  }
  return &n.grad;
}

const Tensor* Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? &n.grad : nullptr;
}

void Tape::backward(const Var& loss) {
  if (loss.value().size() != 1) {
    throw ShapeError("backward() needs a single-element loss, got " + loss.value().shape_string());
  }
  for (Node& n : nodes_) n.has_grad = false;
  Tensor* seed = grad_buffer(loss);
  if (seed == nullptr) return;
  (*seed)[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.param != nullptr) {
      double* dst = n.param->grad.data();
      const double* src = n.grad.data();
      for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
    } else if (n.backward) {
      n.backward(*this, n.grad);
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

}  // namespace gelgt
