#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <deque>
#include <unordered_map>
#include <vector>

#include "gelgt/tensor.hpp"

namespace gelgt {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// owning tape is alive and has not been cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Every op appends a node holding its forward value and a
// closure that pushes the node's gradient into its parents. One tape is one
// training context: it also owns the dropout RNG and the train/eval flag.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  explicit Tape(bool training = false, std::uint64_t seed = 0) : training_(training), rng_(seed) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf bound to a parameter; backward() adds into p.grad. Repeated calls
  // with the same parameter return the same leaf.
  Var param(Parameter& p);
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }

  // Gradient buffer for v, zero-allocated on first use; nullptr when v does
  // not depend on any parameter.
  Tensor* grad_buffer(const Var& v);
  // Gradient accumulated at v by the last backward(), or nullptr.
  const Tensor* grad(const Var& v) const;

  // Reverse sweep from a single-element loss. Node gradients are reset on
  // entry; parameter gradients accumulate across calls.
  void backward(const Var& loss);

  // With gradients disabled, param() yields plain constants and no backward
  // closures are kept; used for inference-only passes.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }
  std::mt19937_64& rng() { return rng_; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  // deque keeps value references stable while ops append.
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  bool training_;
  bool grad_enabled_ = true;
  std::mt19937_64 rng_;
};

}  // namespace gelgt
