#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace wf::ad {

/// Raised when operand shapes do not satisfy an operation's shape rule.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a forward or backward pass produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
  }
};

/// Dense row-major matrix. Scalars are 1x1, vectors are 1xn.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, T fill = T{0})
      : shape_{rows, cols}, data_(rows * cols, fill) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("tensor extents must be positive, got " + shape_.str());
    }
  }
  Tensor(std::size_t rows, std::size_t cols, std::vector<T> values)
      : shape_{rows, cols}, data_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw ShapeError("tensor extents must be positive, got " + shape_.str());
    }
    if (data_.size() != rows * cols) {
      throw ShapeError("value count " + std::to_string(data_.size()) +
                       " does not match shape " + shape_.str());
    }
  }

  static Tensor scalar(T v) { return Tensor(1, 1, v); }
  static Tensor row_vector(std::vector<T> v) {
    const auto n = v.size();
    return Tensor(1, n, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_.cols + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * shape_.cols, shape_.cols};
  }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (const T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_.rows, shape_.cols, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace wf::ad
