#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "spivg/gradtape/ops.hpp"
#include "spivg/random.hpp"

namespace spivg::grad {

/// Named trainable tensors in a fixed (registration) order.
template <typename T>
using ParamList = std::vector<std::pair<std::string, Tensor<T>*>>;

template <typename T>
std::vector<Tensor<T>*> tensors_of(const ParamList<T>& params) {
  std::vector<Tensor<T>*> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

template <typename T>
Tensor<T> make_param(Shape shape, T fill = T{0}) {
  Tensor<T> t(std::move(shape), fill);
  t.set_requires_grad(true);
  return t;
}

/// Gaussian init with standard deviation gain / sqrt(fan_in).
template <typename T>
Tensor<T> make_param_normal(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  Tensor<T> t = make_param<T>(std::move(shape));
  const double sd = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data()) v = static_cast<T>(rng.normal(0.0, sd));
  return t;
}

/// y = x W + b, with W stored [in x out].
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, double gain = 1.0)
      : weight(make_param_normal<T>({in, out}, in, gain, rng)), bias(make_param<T>({out})) {}

  std::size_t in_features() const { return weight.rows(); }
  std::size_t out_features() const { return weight.cols(); }

  Var<T> operator()(const Var<T>& x) {
    Tape<T>& tape = x.tape();
    return add(matmul(x, tape.parameter(weight)), tape.parameter(bias));
  }

  /// Forward on plain values, no tape involved.
  std::vector<double> apply(std::span<const T> x) const {
    const std::size_t in = in_features();
    const std::size_t out = out_features();
    std::vector<double> y(out);
    for (std::size_t j = 0; j < out; ++j) {
      double s = bias[j];
      for (std::size_t i = 0; i < in; ++i) s += static_cast<double>(x[i]) * weight[i * out + j];
      y[j] = s;
    }
    return y;
  }

  void collect(const std::string& prefix, ParamList<T>& out) {
    out.emplace_back(prefix + ".weight", &weight);
    out.emplace_back(prefix + ".bias", &bias);
  }
};

}  // namespace spivg::grad
