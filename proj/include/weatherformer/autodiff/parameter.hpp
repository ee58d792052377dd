#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "weatherformer/autodiff/tensor.hpp"

namespace wf::ad {

/// A named learnable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad.fill(T{0}); }
};

/// Ordered collection of parameters with stable addresses.
///
/// Modules keep raw pointers into the set, so a set must outlive the modules
/// built on it and is move-only.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<T>& add(std::string name, Tensor<T> init) {
    if (index_.contains(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<T>>(std::move(name), std::move(init)));
    return *params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  const Parameter<T>* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : params_[it->second].get();
  }
  Parameter<T>& at(std::string_view name) {
    auto* p = find(name);
    if (p == nullptr) throw std::out_of_range("unknown parameter: " + std::string(name));
    return *p;
  }
  const Parameter<T>& at(std::string_view name) const {
    const auto* p = find(name);
    if (p == nullptr) throw std::out_of_range("unknown parameter: " + std::string(name));
    return *p;
  }

  std::size_t size() const { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t element_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  void set_trainable(bool trainable) {
    for (auto& p : params_) p->trainable = trainable;
  }

  /// Copies values of every same-named, same-shaped parameter from `other`.
  /// Returns the number of parameters copied.
  template <typename U>
  std::size_t copy_values_from(const ParameterSet<U>& other) {
    std::size_t copied = 0;
    for (std::size_t i = 0; i < other.size(); ++i) {
      const auto& src = other[i];
      auto* dst = find(src.name);
      if (dst == nullptr) continue;
      if (!(dst->value.shape() == src.value.shape())) {
        throw ShapeError("shape mismatch copying parameter " + src.name);
      }
      dst->value = src.value.template cast<T>();
      ++copied;
    }
    return copied;
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : params_) {
      auto& q = out.add(p->name, p->value.template cast<U>());
      q.trainable = p->trainable;
    }
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace wf::ad
