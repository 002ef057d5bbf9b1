#include "futurelm/tape.hpp"

#include "futurelm/errors.hpp"

namespace flm {

std::size_t ParameterSet::add(std::string name, Tensor init) {
  if (find(name) != nullptr) throw ContractError("duplicate parameter name '" + name + "'");
  Parameter p{std::move(name), std::move(init), {}};
  p.zero_grad();
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

Parameter& ParameterSet::get(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ContractError("unknown parameter '" + std::string(name) + "'");
}

const Parameter& ParameterSet::get(std::string_view name) const {
  const auto* p = find(name);
  if (p == nullptr) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return *p;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterSet::zero_grad() const {
  for (auto& p : params_) p.zero_grad();
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) {
    throw ContractError("non-finite value entering the graph, shape " + value.shape_string());
  }
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Var(this, it->second);
  }
  nodes_.push_back(Node{{}, {}, {}, &p, grad_enabled_});
  const auto id = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record_impl(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                     std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward) {
  return record_impl(std::move(value), inputs, std::move(backward));
}

Var Tape::record_impl(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  if (grad_enabled_) {
    for (const auto& v : inputs) needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back(
      Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr, needs});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor& Tape::grad(std::uint32_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) {
    const auto& v = value(id);
    node.grad = Tensor(v.rows(), v.cols());
  }
  return node.grad;
}

void Tape::accumulate(std::uint32_t id, const Tensor& g) {
  if (!nodes_[id].requires_grad) return;
  grad(id) += g;
}

void Tape::backward(Var loss) {
  if (!grad_enabled_) throw ContractError("backward() on a tape recorded without gradients");
  if (&loss.tape() != this) throw ContractError("backward() on a node from another tape");
  const auto& lv = loss.value();
  if (lv.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + lv.shape_string());
  }
  if (!lv.all_finite()) throw ContractError("backward() on a non-finite loss");
  grad(loss.id()).fill(1.0);
  for (std::int64_t id = loss.id(); id >= 0; --id) {
    auto& node = nodes_[id];
    if (node.grad.empty() || !node.requires_grad) continue;
    if (node.param != nullptr) node.param->grad += node.grad;
    if (node.backward) {
      // The closure touches its inputs' gradients, never this node's.
      const Tensor g = std::move(node.grad);
      node.backward(*this, g);
    }
  }
}

}  // namespace flm
