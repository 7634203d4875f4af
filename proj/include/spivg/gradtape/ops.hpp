#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/tape.hpp"
#include "spivg/gradtape/tensor.hpp"
#include "spivg/random.hpp"

// Differentiable primitives. Every op records its output and a local backward
// rule on the tape of its inputs. Binary elementwise ops accept an rhs of the
// same shape, a single element, or (for a matrix lhs) one row that is repeated.

namespace spivg::grad {

namespace detail {

[[noreturn]] inline void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] inline void shape_error(std::string_view op, const Shape& a, std::string_view need) {
  throw Error(ErrorCode::kShapeMismatch,
              std::string(op) + ": shape " + shape_str(a) + ", expected " + std::string(need));
}

enum class Broadcast { kSame, kScalar, kRow };

inline Broadcast broadcast_kind(std::string_view op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::kSame;
  if (numel(b) == 1) return Broadcast::kScalar;
  if (a.size() == 2 && ((b.size() == 1 && b[0] == a[1]) ||
                        (b.size() == 2 && b[0] == 1 && b[1] == a[1]))) {
    return Broadcast::kRow;
  }
  shape_error(op, a, b);
}

inline std::size_t rhs_index(Broadcast kind, std::size_t i, std::size_t cols) {
  switch (kind) {
    case Broadcast::kSame: return i;
    case Broadcast::kScalar: return 0;
    case Broadcast::kRow: return i % cols;
  }
  return i;
}

template <typename T>
inline T sigmoid_value(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
inline T gelu_value(T x) {
  return T{0.5} * x * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
}

template <typename T>
inline T gelu_derivative(T x) {
  const T cdf = T{0.5} * (T{1} + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T{-0.5} * x * x) / std::sqrt(T{2} * std::numbers::pi_v<T>);
  return cdf + x * pdf;
}

/// Shared driver for add/sub/hadamard/div: `fwd(a, b)` computes a value, `da`
/// and `db` give the local partials at (a, b).
template <typename T, typename Fwd, typename DA, typename DB>
Var<T> binary(std::string_view op, const Var<T>& a, const Var<T>& b, Fwd fwd, DA da, DB db) {
  Tape<T>& tape = a.tape();
  tape.check_owner(b, op);
  const auto& av = a.value();
  const auto& bv = b.value();
  const Broadcast kind = broadcast_kind(op, av.shape(), bv.shape());
  const std::size_t cols = av.cols();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) {
    out[i] = fwd(av[i], bv[rhs_index(kind, i, cols)]);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record(op, std::move(out), {a, b},
                     [=](Tape<T>& t, std::size_t self) {
                       const auto& g = t.node(self).grad;
                       const auto& x = t.value(ia);
                       const auto& y = t.value(ib);
                       if (t.needs_grad(ia)) {
                         auto ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           ga[i] += g[i] * da(x[i], y[rhs_index(kind, i, cols)]);
                         }
                       }
                       if (t.needs_grad(ib)) {
                         auto gb = t.grad_buffer(ib);
                         std::vector<Accum<T>> acc(gb.size(), 0);
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           const std::size_t j = rhs_index(kind, i, cols);
                           acc[j] += static_cast<Accum<T>>(g[i] * db(x[i], y[j]));
                         }
                         for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += static_cast<T>(acc[j]);
                       }
                     });
}

template <typename T, typename Fwd, typename Deriv>
Var<T> unary(std::string_view op, const Var<T>& a, Fwd fwd, Deriv deriv) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(out), {a}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& x = t.value(ia);
    const auto& y = t.node(self).value;
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace detail

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return detail::binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{1}; });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return detail::binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T{1}; },
      [](T, T) { return T{-1}; });
}

template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  return detail::binary<T>(
      "hadamard", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return detail::binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T{1} / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <typename T>
Var<T> scalar_mul(const Var<T>& a, double c) {
  const T k = static_cast<T>(c);
  return detail::unary<T>(
      "scalar_mul", a, [k](T x) { return k * x; }, [k](T, T) { return k; });
}

template <typename T>
Var<T> add_constant(const Var<T>& a, double c) {
  const T k = static_cast<T>(c);
  return detail::unary<T>(
      "add_constant", a, [k](T x) { return x + k; }, [](T, T) { return T{1}; });
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary<T>(
      "sigmoid", a, [](T x) { return detail::sigmoid_value(x); },
      [](T, T y) { return y * (T{1} - y); });
}

/// Exact GELU, x * Phi(x), with Phi the standard normal CDF.
template <typename T>
Var<T> gelu(const Var<T>& a) {
  return detail::unary<T>(
      "gelu", a, [](T x) { return detail::gelu_value(x); },
      [](T x, T) { return detail::gelu_derivative(x); });
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  return detail::unary<T>(
      "exp", a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Var<T> log(const Var<T>& a) {
  return detail::unary<T>(
      "log", a, [](T x) { return std::log(x); }, [](T x, T) { return T{1} / x; });
}

/// |x| with subgradient 0 at x == 0.
template <typename T>
Var<T> abs(const Var<T>& a) {
  return detail::unary<T>(
      "abs", a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

/// Clamps into [lo, hi]; gradient passes only strictly inside the interval.
template <typename T>
Var<T> clamp(const Var<T>& a, double lo, double hi) {
  const T l = static_cast<T>(lo);
  const T h = static_cast<T>(hi);
  return detail::unary<T>(
      "clamp", a, [l, h](T x) { return std::clamp(x, l, h); },
      [l, h](T x, T) { return (x > l && x < h) ? T{1} : T{0}; });
}

template <typename T>
Var<T> sum(const Var<T>& a) {
  Accum<T> acc = 0;
  for (T v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor<T>::scalar(static_cast<T>(acc)), {a},
                         [ia](Tape<T>& t, std::size_t self) {
                           const T g = t.node(self).grad[0];
                           for (T& v : t.grad_buffer(ia)) v += g;
                         });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  const std::size_t n = a.size();
  if (n == 0) detail::shape_error("mean", a.shape(), "at least one element");
  Accum<T> acc = 0;
  for (T v : a.value().data()) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record("mean", Tensor<T>::scalar(static_cast<T>(acc / static_cast<Accum<T>>(n))),
                         {a}, [ia, n](Tape<T>& t, std::size_t self) {
                           const T g = t.node(self).grad[0] / static_cast<T>(n);
                           for (T& v : t.grad_buffer(ia)) v += g;
                         });
}

/// [m x k] * [k x n].
template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = a.tape();
  tape.check_owner(b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
    detail::shape_error("matmul", av.shape(), bv.shape());
  }
  const std::size_t m = av.rows();
  const std::size_t k = av.cols();
  const std::size_t n = bv.cols();
  Tensor<T> out({m, n});
  std::vector<Accum<T>> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), Accum<T>{0});
    for (std::size_t p = 0; p < k; ++p) {
      const Accum<T> x = av[i * k + p];
      const T* brow = bv.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += x * brow[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(acc[j]);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return tape.record("matmul", std::move(out), {a, b},
                     [ia, ib, m, k, n](Tape<T>& t, std::size_t self) {
                       const auto& g = t.node(self).grad;
                       const auto& x = t.value(ia);
                       const auto& y = t.value(ib);
                       if (t.needs_grad(ia)) {
                         auto ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             Accum<T> s = 0;
                             for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * y[p * n + j];
                             ga[i * k + p] += static_cast<T>(s);
                           }
                         }
                       }
                       if (t.needs_grad(ib)) {
                         auto gb = t.grad_buffer(ib);
                         std::vector<Accum<T>> s(k * n, 0);
                         for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t p = 0; p < k; ++p) {
                             const Accum<T> xv = x[i * k + p];
                             for (std::size_t j = 0; j < n; ++j) s[p * n + j] += xv * g[i * n + j];
                           }
                         }
                         for (std::size_t q = 0; q < s.size(); ++q) gb[q] += static_cast<T>(s[q]);
                       }
                     });
}

/// Euclidean norm of every row of a matrix; zero rows get subgradient 0.
template <typename T>
Var<T> l2_norm_rows(const Var<T>& a) {
  const auto& av = a.value();
  if (av.rank() != 2) detail::shape_error("l2_norm_rows", av.shape(), "a matrix");
  const std::size_t m = av.rows();
  const std::size_t n = av.cols();
  Tensor<T> out({m});
  for (std::size_t i = 0; i < m; ++i) {
    Accum<T> s = 0;
    for (std::size_t j = 0; j < n; ++j) s += static_cast<Accum<T>>(av[i * n + j]) * av[i * n + j];
    out[i] = static_cast<T>(std::sqrt(s));
  }
  const std::size_t ia = a.id();
  return a.tape().record("l2_norm_rows", std::move(out), {a},
                         [ia, m, n](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           const auto& norms = t.node(self).value;
                           const auto& x = t.value(ia);
                           auto ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < m; ++i) {
                             if (norms[i] == T{0}) continue;
                             const T scale = g[i] / norms[i];
                             for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += scale * x[i * n + j];
                           }
                         });
}

/// Concatenates along the leading axis. Rank-1 inputs join end to end; rank-2
/// inputs must agree on the column count.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kInvalidArgument, "concat: no inputs");
  Tape<T>& tape = parts.front().tape();
  const Shape& first = parts.front().shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    tape.check_owner(p, "concat");
    const Shape& s = p.shape();
    if (s.size() != first.size() || (s.size() == 2 && s[1] != first[1]) || s.size() > 2) {
      detail::shape_error("concat", first, s);
    }
    rows += s[0];
  }
  Shape shape = first;
  shape[0] = rows;
  std::vector<T> data;
  data.reserve(numel(shape));
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(data.size());
    ids.push_back(p.id());
    const auto v = p.value().data();
    data.insert(data.end(), v.begin(), v.end());
  }
  return tape.record("concat", Tensor<T>(shape, std::move(data)), parts,
                     [ids, offsets](Tape<T>& t, std::size_t self) {
                       const auto& g = t.node(self).grad;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (!t.needs_grad(ids[k])) continue;
                         auto gi = t.grad_buffer(ids[k]);
                         for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[offsets[k] + i];
                       }
                     });
}

/// Rows [begin, end) of a matrix, or elements [begin, end) of a sequence.
template <typename T>
Var<T> slice_rows(const Var<T>& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (av.rank() == 0 || av.rank() > 2 || begin > end || end > av.rows()) {
    detail::shape_error("slice_rows", av.shape(),
                        "rows [" + std::to_string(begin) + ", " + std::to_string(end) + ")");
  }
  const std::size_t cols = av.cols();
  Shape shape = av.shape();
  shape[0] = end - begin;
  std::vector<T> data(av.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                      av.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  const std::size_t ia = a.id();
  const std::size_t offset = begin * cols;
  return a.tape().record("slice_rows", Tensor<T>(shape, std::move(data)), {a},
                         [ia, offset](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
                         });
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value();
  out.reshape(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(out), {a}, [ia](Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    auto ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

/// Inverted dropout: each element survives with `keep_prob` and is rescaled by
/// 1/keep_prob. keep_prob == 1 returns the input handle unchanged.
template <typename T>
Var<T> dropout(const Var<T>& a, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "dropout: keep probability must be in (0, 1], got " + std::to_string(keep_prob));
  }
  if (keep_prob == 1.0) return a;
  const auto& av = a.value();
  std::vector<T> mask(av.size());
  const T scale = static_cast<T>(1.0 / keep_prob);
  for (auto& m : mask) m = rng.bernoulli(keep_prob) ? scale : T{0};
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * mask[i];
  const std::size_t ia = a.id();
  return a.tape().record("dropout", std::move(out), {a},
                         [ia, mask = std::move(mask)](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto ga = t.grad_buffer(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
                         });
}

/// Row i of the output is the mean of rows neighbors[i] of `h`; rows with an
/// empty neighbor list are zero.
template <typename T>
Var<T> neighbor_mean(const Var<T>& h, const std::vector<std::vector<std::size_t>>& neighbors) {
  const auto& hv = h.value();
  if (hv.rank() != 2 || neighbors.size() != hv.rows()) {
    detail::shape_error("neighbor_mean", hv.shape(),
                        std::to_string(neighbors.size()) + " rows (one per neighbor list)");
  }
  const std::size_t n = hv.rows();
  const std::size_t d = hv.cols();
  Tensor<T> out({n, d});
  std::vector<Accum<T>> acc(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (neighbors[i].empty()) continue;
    std::fill(acc.begin(), acc.end(), Accum<T>{0});
    for (std::size_t j : neighbors[i]) {
      if (j >= n) throw Error(ErrorCode::kInvalidArgument, "neighbor_mean: neighbor index out of range");
      for (std::size_t c = 0; c < d; ++c) acc[c] += hv[j * d + c];
    }
    const auto inv = Accum<T>{1} / static_cast<Accum<T>>(neighbors[i].size());
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = static_cast<T>(acc[c] * inv);
  }
  const std::size_t ih = h.id();
  return h.tape().record("neighbor_mean", std::move(out), {h},
                         [ih, neighbors, d](Tape<T>& t, std::size_t self) {
                           const auto& g = t.node(self).grad;
                           auto gh = t.grad_buffer(ih);
                           for (std::size_t i = 0; i < neighbors.size(); ++i) {
                             if (neighbors[i].empty()) continue;
                             const T inv = T{1} / static_cast<T>(neighbors[i].size());
                             for (std::size_t j : neighbors[i]) {
                               for (std::size_t c = 0; c < d; ++c) gh[j * d + c] += g[i * d + c] * inv;
                             }
                           }
                         });
}

}  // namespace spivg::grad
