#pragma once

// Reverse-mode gradient tape.
//
// Every primitive appends one node holding its forward value and a closure
// that pushes the node's gradient into its inputs. Nodes are written once and
// appended in evaluation order, so a single reverse sweep is a valid
// reverse-topological traversal.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ispw/grad/params.hpp"
#include "ispw/grad/tensor.hpp"

namespace ispw::grad {

template <class T>
class Tape;

/// Lightweight handle to a tape node.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return tape->value(id); }
  const Shape& shape() const { return tape->value(id).shape(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    std::string param;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> v) { return push(std::move(v), false, {}, nullptr, "constant"); }

  /// Unnamed leaf whose gradient is retrievable through `grad`.
  Var<T> variable(Tensor<T> v) { return push(std::move(v), true, {}, nullptr, "variable"); }

  /// Parameter leaf; one node per name no matter how often it is requested.
  Var<T> param(const ParamSet<T>& params, const std::string& name) {
    if (auto it = param_ids_.find(name); it != param_ids_.end()) return {this, it->second};
    Var<T> v = push(params.at(name), true, {}, nullptr, "param");
    nodes_[static_cast<std::size_t>(v.id)].param = name;
    param_ids_.emplace(name, v.id);
    return v;
  }

  /// Append an op result. The closure runs only if some input requires grad.
  Var<T> record(Tensor<T> value, std::vector<int> inputs, BackwardFn fn, std::string_view op) {
    bool rg = false;
    for (int i : inputs) rg = rg || nodes_[static_cast<std::size_t>(i)].requires_grad;
    return push(std::move(value), rg, std::move(inputs), rg ? std::move(fn) : nullptr, op);
  }

  const Tensor<T>& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Gradient buffer of node `id`, zero-allocated on first touch.
  Tensor<T>& grad_ref(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() && n.value.numel() != 0) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }
  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  /// Gradient of a leaf after `backward`; zeros when nothing reached it.
  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    return n.grad.empty() ? Tensor<T>(n.value.shape()) : n.grad;
  }

  /// Reverse sweep from a scalar loss. Returns gradients for every parameter
  /// leaf on this tape, shaped like the parameter.
  ParamSet<T> backward(Var<T> loss) {
    if (loss.tape != this) throw ContractError("backward: loss belongs to a different tape");
    const Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (ln.value.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape()));
    }
    grad_ref(loss.id)[0] = T(1);
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
    ParamSet<T> out;
    for (const auto& [name, id] : param_ids_) out.add(name, grad(Var<T>{this, id}));
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

  /// When enabled, non-smooth ops append one byte per element describing
  /// which side of their kink the input lies on. Gradient checks compare
  /// signatures to exclude perturbations that cross a kink.
  void enable_kink_tracking(bool on) { track_kinks_ = on; }
  bool tracking_kinks() const { return track_kinks_; }
  void note_kink(std::uint8_t side) { kinks_.push_back(side); }
  const std::vector<std::uint8_t>& kink_signature() const { return kinks_; }

 private:
  Var<T> push(Tensor<T> value, bool rg, std::vector<int> inputs, BackwardFn fn, std::string_view op) {
    for (T v : value.values()) {
      if (!std::isfinite(v)) {
        throw DomainError("non-finite value produced by '" + std::string(op) + "' (node " +
                          std::to_string(nodes_.size()) + ")");
      }
    }
    Node n;
    n.value = std::move(value);
    n.requires_grad = rg;
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> param_ids_;
  bool track_kinks_ = false;
  std::vector<std::uint8_t> kinks_;
};

}  // namespace ispw::grad
