#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "loadsynth/tensor.hpp"

namespace loadsynth::ad {

struct Node;

// Accumulates into input_grads[i]; an entry is null when that input needs no gradient.
using BackwardFn = std::function<void(const Node& self, const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

struct Node {
  Tensor value;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
  bool requires_grad = false;
  const char* op = "leaf";
};

// Handle to a node of the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->inputs.empty() && !node_->backward; }
  const char* op() const { return node_->op; }
  const Node* node() const { return node_.get(); }
  explicit operator bool() const { return static_cast<bool>(node_); }

  // Leaves only; used by optimizers and checkpoint loading.
  Tensor& mutable_value();

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Var make_op(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);
};

Var make_op(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

// While alive, new operations on this thread record no graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Gradients of one backward pass, keyed by graph node.
class Gradients {
 public:
  // Zero tensor of the right shape when v was not reached by the pass.
  Tensor of(const Var& v) const;
  bool reached(const Var& v) const;

 private:
  std::unordered_map<const Node*, Tensor> grads_;
  friend Gradients backward(const Var& loss);
};

// Reverse-mode pass from a single-element loss.
Gradients backward(const Var& loss);

// --- operations -----------------------------------------------------------

Var matmul(const Var& a, const Var& b);             // (m,k) x (k,n)
Var matmul_transposed(const Var& a, const Var& b);  // (m,k) x (n,k)^T
Var transpose(const Var& a);
// Equal shapes, or a (rows, d) matrix with a length-d vector replicated over rows.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softmax(const Var& a);  // over the last axis
Var concat(std::span<const Var> parts, std::size_t axis);
std::vector<Var> split(const Var& a, std::size_t chunks, std::size_t axis);
Var reshape(const Var& a, Shape shape);
Var sum(const Var& a);
Var mean(const Var& a);
Var sum_squared_error(const Var& a, const Var& b);
// Fused LSTM over the rows of gate_inputs (L, 4w) = x W_input + bias, with
// hidden weights (w, 4w), gates ordered input, forget, cell, output and zero
// initial state. Returns every hidden state, (L, w).
Var lstm(const Var& gate_inputs, const Var& w_hidden);

inline Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

// --- parameters -----------------------------------------------------------

struct NamedParameter {
  std::string name;
  Var var;
};

// Ordered collection of trainable leaves; order fixes serialization and RNG draw order.
class ParameterSet {
 public:
  Var add(std::string name, Tensor initial);
  const Var& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::span<const NamedParameter> items() const { return params_; }
  std::vector<Var> vars() const;

  std::vector<Tensor> gradients(const Gradients& grads) const;

 private:
  std::vector<NamedParameter> params_;
};

}  // namespace loadsynth::ad
