#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/ops.hpp"

// Variational fusion of channel scores. Each channel k_i is a Gaussian
// observation of the latent summary y with isotropic variance sigma_i^2; the
// fused score is the posterior mean under a Gaussian prior N(mu_0, sigma_0^2).

namespace spivg::fusion {

struct FusionConfig {
  std::vector<int> orders = {1, 2, 3};
  double mu0 = 0.15;
  double sigma0_sq = 10.0;
  double sigmay_inv = 0.0;

  void validate() const {
    if (orders.empty()) throw Error(ErrorCode::kConfig, "fusion: orders must be nonempty");
    for (int m : orders) {
      if (m < 1) throw Error(ErrorCode::kConfig, "fusion: orders must be >= 1");
    }
    if (!(sigma0_sq > 0.0)) throw Error(ErrorCode::kConfig, "fusion: sigma0_sq must be > 0");
    if (!(sigmay_inv >= 0.0)) throw Error(ErrorCode::kConfig, "fusion: sigmay_inv must be >= 0");
  }
};

/// Mean absolute m-th order difference, normalized by the T-m valid terms.
inline double diff_abs_mean(std::span<const double> k, int m) {
  if (m < 1 || static_cast<std::size_t>(m) >= k.size()) {
    throw Error(ErrorCode::kInvalidArgument, "diff_abs_mean: order " + std::to_string(m) +
                                                 " needs a sequence longer than " + std::to_string(m) +
                                                 ", got " + std::to_string(k.size()));
  }
  const auto mm = static_cast<std::size_t>(m);
  double s = 0.0;
  for (std::size_t t = 0; t + mm < k.size(); ++t) s += std::abs(k[t + mm] - k[t]);
  return s / static_cast<double>(k.size() - mm);
}

/// sigma_i^2 = exp(b_i + sum_m w_m delta_i^m).
inline double channel_variance(std::span<const double> w, double b_i, std::span<const int> orders,
                               std::span<const double> k) {
  if (w.size() != orders.size()) {
    throw Error(ErrorCode::kShapeMismatch, "channel_variance: one weight per order required");
  }
  double e = b_i;
  for (std::size_t q = 0; q < orders.size(); ++q) e += w[q] * diff_abs_mean(k, orders[q]);
  return std::exp(e);
}

struct ChannelObservation {
  std::vector<double> k;
  double sigma_sq = 1.0;
};

/// Prior and Sigma_y terms of the posterior. `prior_precision` = 1/sigma_0^2 (0
/// disables the prior).
struct Prior {
  double mu0 = 0.15;
  double prior_precision = 0.1;
  double sigmay_inv = 0.0;

  static Prior from(const FusionConfig& cfg) { return {cfg.mu0, 1.0 / cfg.sigma0_sq, cfg.sigmay_inv}; }
};

inline void check_observations(const std::vector<ChannelObservation>& obs) {
  if (obs.empty()) throw Error(ErrorCode::kInvalidArgument, "posterior_mean: no observations");
  for (const auto& o : obs) {
    if (o.k.size() != obs.front().k.size()) {
      throw Error(ErrorCode::kShapeMismatch, "posterior_mean: channel lengths differ (" +
                                                 std::to_string(o.k.size()) + " vs " +
                                                 std::to_string(obs.front().k.size()) + ")");
    }
    if (!(o.sigma_sq > 0.0)) throw Error(ErrorCode::kInvalidArgument, "posterior_mean: sigma_sq must be > 0");
  }
}

/// mu[t] = (mu0 / s0^2 + sum_i k_i[t] / s_i^2) / (1 / s0^2 + sum_i 1 / s_i^2 + sigmay_inv).
inline std::vector<double> posterior_mean(const Prior& prior, const std::vector<ChannelObservation>& obs) {
  check_observations(obs);
  const std::size_t n = obs.front().k.size();
  double precision = prior.prior_precision + prior.sigmay_inv;
  for (const auto& o : obs) precision += 1.0 / o.sigma_sq;
  std::vector<double> mu(n);
  for (std::size_t t = 0; t < n; ++t) {
    double num = prior.prior_precision * prior.mu0;
    for (const auto& o : obs) num += o.k[t] / o.sigma_sq;
    mu[t] = num / precision;
  }
  return mu;
}

/// Variational objective for a diagonal Gaussian q(y) = N(q_mean, diag(q_var)),
/// up to an additive constant. It is concave in q_mean and maximized at
/// posterior_mean.
inline double elbo_value(const Prior& prior, const std::vector<ChannelObservation>& obs,
                         std::span<const double> q_mean, std::span<const double> q_var) {
  check_observations(obs);
  const std::size_t n = obs.front().k.size();
  if (q_mean.size() != n || q_var.size() != n) {
    throw Error(ErrorCode::kShapeMismatch, "elbo_value: q has the wrong length");
  }
  double a = prior.prior_precision + prior.sigmay_inv;
  for (const auto& o : obs) a += 1.0 / o.sigma_sq;
  double value = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!(q_var[t] > 0.0)) throw Error(ErrorCode::kInvalidArgument, "elbo_value: q_var must be > 0");
    double b = prior.prior_precision * prior.mu0;
    for (const auto& o : obs) b += o.k[t] / o.sigma_sq;
    value -= 0.5 * (a * q_mean[t] * q_mean[t] - 2.0 * b * q_mean[t] + a * q_var[t]);
    value += 0.5 * std::log(q_var[t]);
  }
  return value;
}

/// Learnable part of the fusion module: one weight per difference order
/// (shared by channels) and one bias per channel.
template <typename T>
struct FusionModule {
  FusionConfig config;
  grad::Tensor<T> w;
  grad::Tensor<T> b;

  FusionModule() = default;
  FusionModule(const FusionConfig& cfg, std::size_t n_channels)
      : config(cfg), w(grad::make_param<T>({cfg.orders.size()})), b(grad::make_param<T>({n_channels})) {
    cfg.validate();
  }

  std::size_t n_channels() const { return b.size(); }

  /// Differentiable posterior mean over `channels` (each [T]); gradients reach
  /// w, b and the channel scores (through both the numerator and delta).
  grad::Var<T> operator()(const std::vector<grad::Var<T>>& channels) {
    if (channels.size() != n_channels()) {
      throw Error(ErrorCode::kShapeMismatch, "fusion: expected " + std::to_string(n_channels()) +
                                                 " channels, got " + std::to_string(channels.size()));
    }
    auto& tape = channels.front().tape();
    return posterior(tape.parameter(w), tape.parameter(b), channels, config);
  }

  static grad::Var<T> log_variance(const grad::Var<T>& w, const grad::Var<T>& b, std::size_t i,
                                   const grad::Var<T>& k, const std::vector<int>& orders) {
    const std::size_t n = k.size();
    grad::Var<T> e = grad::slice_rows(b, i, i + 1);
    for (std::size_t q = 0; q < orders.size(); ++q) {
      const auto m = static_cast<std::size_t>(orders[q]);
      if (m >= n) {
        throw Error(ErrorCode::kInvalidArgument, "fusion: order " + std::to_string(m) +
                                                     " needs more than " + std::to_string(m) + " frames");
      }
      auto delta = grad::mean(grad::abs(grad::sub(grad::slice_rows(k, m, n), grad::slice_rows(k, 0, n - m))));
      e = grad::add(e, grad::hadamard(grad::slice_rows(w, q, q + 1), delta));
    }
    return e;
  }

  static grad::Var<T> posterior(const grad::Var<T>& w, const grad::Var<T>& b,
                                const std::vector<grad::Var<T>>& channels, const FusionConfig& cfg) {
    const std::size_t n = channels.front().size();
    const Prior prior = Prior::from(cfg);
    grad::Var<T> num;
    grad::Var<T> den;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i].size() != n) throw Error(ErrorCode::kShapeMismatch, "fusion: channel lengths differ");
      auto precision = grad::exp(grad::scalar_mul(log_variance(w, b, i, channels[i], cfg.orders), -1.0));
      auto term = grad::hadamard(channels[i], precision);
      num = i == 0 ? term : grad::add(num, term);
      den = i == 0 ? precision : grad::add(den, precision);
    }
    num = grad::add_constant(num, prior.prior_precision * prior.mu0);
    den = grad::add_constant(den, prior.prior_precision + prior.sigmay_inv);
    return grad::div(num, den);
  }

  /// Plain-value variances, one per channel.
  std::vector<double> variances(const std::vector<std::vector<double>>& channels) const {
    std::vector<double> wv(w.data().begin(), w.data().end());
    std::vector<double> out;
    for (std::size_t i = 0; i < channels.size(); ++i) {
      out.push_back(channel_variance(wv, b[i], config.orders, channels[i]));
    }
    return out;
  }

  void collect(const std::string& prefix, grad::ParamList<T>& out) {
    out.emplace_back(prefix + ".w", &w);
    out.emplace_back(prefix + ".b", &b);
  }
};

}  // namespace spivg::fusion
