#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "futurelm/tensor.hpp"

namespace flm {

// A named trainable tensor together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  // Accumulator written by Tape::backward(); mutable so that read-only
  // models can still be placed on a tape.
  mutable Tensor grad;

  void zero_grad() const { grad = Tensor(value.rows(), value.cols()); }
};

// Owns parameters by value; handles are indices that survive copies, so a
// model can be cloned by copying its ParameterSet.
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor init);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() const;

 private:
  std::vector<Parameter> params_;
};

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Records forward computations and replays them in reverse to accumulate
// gradients. Nodes are appended in evaluation order, which is a topological
// order of the (acyclic) graph. Single-threaded.
class Tape {
 public:
  // Receives the gradient of the loss with respect to the node's value and
  // accumulates into the gradients of the node's inputs.
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  // Data that does not receive gradients. Non-finite values are rejected.
  Var constant(Tensor value);
  // Leaf bound to a parameter (its value is referenced, not copied); its
  // gradient is added to Parameter::grad by backward(). Repeated calls with
  // the same parameter return the same node. The parameter must outlive the
  // tape and keep its value unchanged while the tape is in use.
  Var param(const Parameter& p);
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

  const Tensor& value(std::uint32_t id) const {
    const auto& n = nodes_[id];
    return n.param != nullptr ? n.param->value : n.value;
  }
  bool needs_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of a node, allocated as zeros on first access.
  Tensor& grad(std::uint32_t id);
  void accumulate(std::uint32_t id, const Tensor& g);

  // Seeds d(loss)/d(loss) = 1 and propagates. The loss must be a 1x1 node.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  Var record_impl(Tensor value, std::span<const Var> inputs, Backward backward);

  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    const Parameter* param = nullptr;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;  // references to values stay valid as nodes are added
  std::unordered_map<const Parameter*, std::uint32_t> param_nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace flm
