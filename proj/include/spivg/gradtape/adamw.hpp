#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/tensor.hpp"

namespace spivg::grad {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias correction and decoupled weight decay. Moments are kept in
/// double; the first step() fixes the parameter layout.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {
    if (!(config.lr >= 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.eps > 0.0) ||
        !(config.weight_decay >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "adamw: invalid hyperparameters");
    }
  }

  void step(const std::vector<Tensor<T>*>& params) {
    if (m_.empty()) {
      for (const Tensor<T>* p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
      }
    }
    if (params.size() != m_.size()) {
      throw Error(ErrorCode::kShapeMismatch, "adamw: expected " + std::to_string(m_.size()) +
                                                 " parameters, got " + std::to_string(params.size()));
    }
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    const double decay = 1.0 - config_.lr * config_.weight_decay;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor<T>& p = *params[k];
      auto g = p.grad();
      if (p.size() != m_[k].size() || g.size() != p.size()) {
        throw Error(ErrorCode::kShapeMismatch,
                    "adamw: parameter " + std::to_string(k) + " has shape " + shape_str(p.shape()) +
                        " but optimizer state holds " + std::to_string(m_[k].size()) + " values");
      }
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i];
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
        const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
        p[i] = static_cast<T>(static_cast<double>(p[i]) * decay - config_.lr * update);
      }
    }
  }

  std::int64_t steps() const noexcept { return step_; }
  const AdamWConfig& config() const noexcept { return config_; }
  const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

 private:
  AdamWConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t step_ = 0;
};

}  // namespace spivg::grad
