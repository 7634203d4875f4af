#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "spivg/error.hpp"

namespace spivg::grad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Reductions accumulate in at least double precision regardless of storage.
template <typename T>
using Accum = std::conditional_t<(sizeof(T) < sizeof(double)), double, T>;

/// Dense row-major tensor. Rank 1 holds sequences, rank 2 holds frame-by-feature
/// matrices. The gradient buffer exists iff requires_grad is set.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (numel(shape_) != data_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "tensor: shape " + shape_str(shape_) + " holds " +
                                                 std::to_string(numel(shape_)) + " values, got " +
                                                 std::to_string(data_.size()));
    }
  }

  static Tensor scalar(T value) { return Tensor({1}, std::vector<T>{value}); }

  static Tensor vector(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<T> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() >= 2 ? shape_[1] : 1; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }
  std::span<T> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }

  bool requires_grad() const noexcept { return requires_grad_; }

  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (on) {
      grad_.assign(data_.size(), T{0});
    } else {
      grad_.clear();
    }
  }

  std::span<T> grad() noexcept { return grad_; }
  std::span<const T> grad() const noexcept { return grad_; }

  void zero_grad() { std::fill(grad_.begin(), grad_.end(), T{0}); }

  void reshape(Shape shape) {
    if (numel(shape) != data_.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "reshape: " + shape_str(shape_) + " -> " + shape_str(shape));
    }
    shape_ = std::move(shape);
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::vector<T> grad_;
  bool requires_grad_ = false;
};

}  // namespace spivg::grad
