#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "spivg/error.hpp"
#include "spivg/gradtape/tape.hpp"

namespace spivg::grad {

/// Predictions are clamped into [kBceClamp, 1 - kBceClamp] before the logs; the
/// fused scores that feed this loss are not squashed upstream.
inline constexpr double kBceClamp = 1e-6;

/// Mean binary cross-entropy over frames. `target` may hold soft labels in [0, 1].
template <typename T>
Var<T> bce_loss(const Var<T>& pred, const Tensor<T>& target) {
  const auto& p = pred.value();
  if (p.size() != target.size()) {
    throw Error(ErrorCode::kShapeMismatch, "bce_loss: prediction length " +
                                               std::to_string(p.size()) + " vs target length " +
                                               std::to_string(target.size()));
  }
  const std::size_t n = p.size();
  if (n == 0) throw Error(ErrorCode::kShapeMismatch, "bce_loss: empty sequence");
  const double lo = kBceClamp;
  const double hi = 1.0 - kBceClamp;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(static_cast<double>(p[i]), lo, hi);
    const double y = target[i];
    acc -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  const std::size_t ip = pred.id();
  return pred.tape().record(
      "bce_loss", Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n))), {pred},
      [ip, target, n, lo, hi](Tape<T>& t, std::size_t self) {
        const double g = t.node(self).grad[0];
        const auto& x = t.value(ip);
        auto gp = t.grad_buffer(ip);
        for (std::size_t i = 0; i < n; ++i) {
          const double q = x[i];
          if (!(q > lo && q < hi)) continue;
          gp[i] += static_cast<T>(g * (q - target[i]) / (q * (1.0 - q)) / static_cast<double>(n));
        }
      });
}

}  // namespace spivg::grad
