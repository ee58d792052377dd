#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "weatherformer/autodiff/parameter.hpp"
#include "weatherformer/autodiff/tensor.hpp"

namespace wf::ad {

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <typename T>
class Tape;

/// Handle to a value recorded on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Whether backward() pushes leaf gradients into Parameter::grad immediately
/// or leaves them on the tape for an ordered flush_parameter_grads().
enum class GradSink { kParameters, kDeferred };

/// Single-writer record of forward operations for reverse-mode differentiation.
///
/// Operations are appended in evaluation order, so the tape is topologically
/// sorted by construction. backward() walks it once in reverse.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) {
    check_finite(value, "constant");
    return push(std::move(value), false, {}, nullptr);
  }

  /// Leaf node bound to a parameter. Repeated calls return the same node.
  Var<T> parameter(Parameter<T>& p) {
    if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
      return Var<T>(this, it->second);
    }
    auto v = push(p.value, p.trainable, {}, nullptr);
    nodes_[v.id()].param = &p;
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  /// Appends an operation result. `backward` is dropped when no input needs a
  /// gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn backward,
                const char* op_name) {
    return record(std::move(value), std::vector<Var<T>>(inputs), std::move(backward), op_name);
  }

  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn backward,
                const char* op_name) {
    check_finite(value, op_name);
    bool needs = false;
    std::vector<std::uint32_t> ids;
    ids.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (&in.tape() != this) throw TapeError(std::string(op_name) + ": inputs from another tape");
      needs = needs || nodes_[in.id()].needs_grad;
      ids.push_back(in.id());
    }
    return push(std::move(value), needs, std::move(ids), needs ? std::move(backward) : nullptr);
  }

  const Tensor<T>& value(std::uint32_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }

  /// Gradient slot of a node, allocated as zeros on first access.
  Tensor<T>& grad(std::uint32_t id) {
    auto& n = nodes_[id];
    if (!n.grad) n.grad.emplace(n.value.rows(), n.value.cols(), T{0});
    return *n.grad;
  }
  const Tensor<T>* grad_if_any(std::uint32_t id) const {
    const auto& n = nodes_[id];
    return n.grad ? &*n.grad : nullptr;
  }

  std::size_t size() const { return nodes_.size(); }
  std::size_t operation_count() const { return op_count_; }
  bool consumed() const { return consumed_; }

  /// Reverse sweep from a scalar loss. Each recorded backward rule runs at most
  /// once. The tape cannot be differentiated again afterwards.
  void backward(Var<T> loss, GradSink sink = GradSink::kParameters) {
    if (consumed_) throw TapeError("tape already consumed by a previous backward pass");
    if (&loss.tape() != this) throw TapeError("loss belongs to another tape");
    const auto& lv = value(loss.id());
    if (lv.size() != 1) throw TapeError("backward requires a scalar loss, got " + lv.shape().str());
    consumed_ = true;
    backward_visits_ = 0;
    grad(loss.id())[0] = T{1};
    for (std::int64_t i = loss.id(); i >= 0; --i) {
      auto& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.needs_grad || !n.grad || !n.backward) continue;
      n.backward(*this, static_cast<std::uint32_t>(i));
      ++backward_visits_;
    }
    for (auto& n : nodes_) {
      if (n.param != nullptr && n.grad && !n.grad->all_finite()) {
        throw NumericError("non-finite gradient for parameter " + n.param->name);
      }
    }
    if (sink == GradSink::kParameters) flush_parameter_grads();
  }

  /// Adds the leaf gradients of this tape into the bound parameters.
  void flush_parameter_grads() {
    if (!consumed_) throw TapeError("flush_parameter_grads before backward");
    if (flushed_) return;
    flushed_ = true;
    for (auto& n : nodes_) {
      if (n.param == nullptr || !n.grad || !n.param->trainable) continue;
      auto dst = n.param->grad.values();
      auto src = n.grad->values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

  /// Number of backward rules executed by the last backward().
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor<T> value;
    std::optional<Tensor<T>> grad;
    bool needs_grad = false;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(Tensor<T> value, bool needs_grad, std::vector<std::uint32_t> inputs,
              BackwardFn backward) {
    if (consumed_) throw TapeError("cannot record on a consumed tape");
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
    if (!n.inputs.empty()) ++op_count_;
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
  }

  static void check_finite(const Tensor<T>& t, const char* op_name) {
    if (!t.all_finite()) {
      throw NumericError(std::string("non-finite output from ") + op_name);
    }
  }

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::uint32_t> param_nodes_;
  std::size_t op_count_ = 0;
  std::size_t backward_visits_ = 0;
  bool consumed_ = false;
  bool flushed_ = false;
};

}  // namespace wf::ad
