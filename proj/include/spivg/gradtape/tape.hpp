#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/tensor.hpp"

namespace spivg::grad {

template <typename T>
class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; only valid while the
/// owning tape is alive.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Append-only record of a forward computation. Nodes are stored in creation
/// order, so inputs always precede the ops that consume them and the reverse
/// sweep in backward() is a valid topological order.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  struct Node {
    std::string_view op;
    Tensor<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Tensor<T>* parameter = nullptr;
    bool needs_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) {
    nodes_.push_back(Node{"constant", std::move(value), {}, {}, {}, nullptr, false});
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Binds a trainable tensor. Gradients reaching this leaf are accumulated into
  /// `param.grad()` when it requires grad.
  Var<T> parameter(Tensor<T>& param) {
    nodes_.push_back(Node{"parameter", param, {}, {}, {}, &param, param.requires_grad()});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> record(std::string_view op, Tensor<T> value, const std::vector<Var<T>>& inputs,
                BackwardFn backward) {
    Node node{op, std::move(value), {}, {}, {}, nullptr, false};
    node.inputs.reserve(inputs.size());
    for (const auto& in : inputs) {
      check_owner(in, op);
      node.inputs.push_back(in.id());
      node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
    }
    if (node.needs_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    ++op_count_;
    return Var<T>(this, nodes_.size() - 1);
  }

  void backward(const Var<T>& loss) {
    if (loss.tape_ != this || loss.id() >= nodes_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "backward: loss was not recorded on this tape");
    }
    if (nodes_[loss.id()].value.size() != 1) {
      throw Error(ErrorCode::kShapeMismatch,
                  "backward: loss must be scalar, got shape " +
                      shape_str(nodes_[loss.id()].value.shape()));
    }
    for (auto& node : nodes_) node.grad.clear();
    backward_calls_ = 0;
    grad_buffer(loss.id())[0] = T{1};
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      Node& node = nodes_[id];
      if (node.grad.empty() || !node.needs_grad) continue;
      if (node.parameter != nullptr) {
        auto dst = node.parameter->grad();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += node.grad[i];
      } else if (node.backward) {
        node.backward(*this, id);
        ++backward_calls_;
      }
    }
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Gradient of a node, allocated (zeroed) on first touch.
  std::span<T> grad_buffer(std::size_t id) {
    auto& g = nodes_[id].grad;
    if (g.empty()) g.assign(nodes_[id].value.size(), T{0});
    return g;
  }

  /// Gradient after backward(); empty if the node received none.
  std::span<const T> grad(const Var<T>& v) const { return nodes_[v.id()].grad; }

  std::size_t op_count() const noexcept { return op_count_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t backward_invocations() const noexcept { return backward_calls_; }

  void check_owner(const Var<T>& v, std::string_view op) const {
    if (v.tape_ != this) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(op) + ": input belongs to a different tape");
    }
  }

 private:
  std::vector<Node> nodes_;
  std::size_t op_count_ = 0;
  std::size_t backward_calls_ = 0;
};

}  // namespace spivg::grad
