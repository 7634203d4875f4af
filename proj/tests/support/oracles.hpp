#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour directness over speed and share no code with the library
// beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "spivg/gradtape.hpp"
#include "spivg/random.hpp"

namespace oracle {

using spivg::grad::Tape;
using spivg::grad::Tensor;
using spivg::grad::Var;

using GraphFn = std::function<Var<double>(Tape<double>&, const std::vector<Var<double>>&)>;

/// |a - n| / max(1, |a|, |n|): relative for large gradients, absolute near 0.
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Compares tape gradients of a scalar function of `inputs` with central
/// differences and returns the worst rel_err over every input element.
inline double gradcheck(std::vector<Tensor<double>> inputs, const GraphFn& f, double h = 1e-4) {
  for (auto& t : inputs) t.set_requires_grad(true);
  std::vector<std::vector<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (auto& t : inputs) vars.push_back(tape.parameter(t));
    tape.backward(f(tape, vars));
    for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());
  }
  auto eval = [&]() {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (auto& t : inputs) vars.push_back(tape.constant(t));
    return f(tape, vars).value()[0];
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      inputs[k][i] = x0 + h;
      const double up = eval();
      inputs[k][i] = x0 - h;
      const double down = eval();
      inputs[k][i] = x0;
      worst = std::max(worst, rel_err(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

/// Same check for tensors owned by a module. `run(true)` builds the scalar on
/// a fresh tape and back-propagates it; `run(false)` only evaluates it.
inline double module_gradcheck(const std::vector<Tensor<double>*>& params, const std::function<double(bool)>& run,
                               double h = 1e-5) {
  for (auto* p : params) p->zero_grad();
  run(true);
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.emplace_back(p->grad().begin(), p->grad().end());
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double>& t = *params[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x0 = t[i];
      t[i] = x0 + h;
      const double up = run(false);
      t[i] = x0 - h;
      const double down = run(false);
      t[i] = x0;
      worst = std::max(worst, rel_err(analytic[k][i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

inline Tensor<double> random_tensor(spivg::grad::Shape shape, spivg::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Best knapsack value by enumerating every subset.
inline double knapsack_brute_force(const std::vector<double>& scores, const std::vector<std::size_t>& lengths,
                                   std::size_t budget) {
  const std::size_t n = scores.size();
  double best = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    double value = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        value += scores[i];
        used += lengths[i];
      }
    }
    if (used <= budget) best = std::max(best, value);
  }
  return best;
}

/// Scatter of frames [a, b) around their mean, computed directly.
inline double segment_scatter(const Tensor<double>& x, std::size_t a, std::size_t b) {
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t t = a; t < b; ++t) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += x.at(t, c);
  }
  for (auto& m : mean) m /= static_cast<double>(b - a);
  double s = 0.0;
  for (std::size_t t = a; t < b; ++t) {
    for (std::size_t c = 0; c < d; ++c) s += (x.at(t, c) - mean[c]) * (x.at(t, c) - mean[c]);
  }
  return s;
}

/// Minimum of scatter + penalty * segments over every segmentation into at
/// most max_segments parts, by enumerating boundary subsets.
inline double kts_brute_force(const Tensor<double>& x, std::size_t max_segments, double penalty) {
  const std::size_t n = x.rows();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::size_t> bounds{0};
    for (std::size_t t = 1; t < n; ++t) {
      if (mask & (1u << (t - 1))) bounds.push_back(t);
    }
    bounds.push_back(n);
    const std::size_t m = bounds.size() - 1;
    if (m > max_segments) continue;
    double cost = penalty * static_cast<double>(m);
    for (std::size_t s = 0; s < m; ++s) cost += segment_scatter(x, bounds[s], bounds[s + 1]);
    best = std::min(best, cost);
  }
  return best;
}

/// Kendall tau-b from explicit pair counts; nullopt-like NaN when undefined.
inline double kendall_pairs(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::int64_t concordant = 0, discordant = 0, tie_a = 0, tie_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0) ++tie_a;
      if (db == 0.0) ++tie_b;
      if (da == 0.0 || db == 0.0) continue;
      ((da > 0) == (db > 0) ? concordant : discordant) += 1;
    }
  }
  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  if (n0 == tie_a || n0 == tie_b) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(n0 - tie_a) * static_cast<double>(n0 - tie_b));
}

/// Ranks by counting: rank_i = #{x_j < x_i} + (#{x_j == x_i} + 1) / 2.
inline std::vector<double> count_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0.0, equal = 0.0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

inline double pearson_direct(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

inline double spearman_definition(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson_direct(count_ranks(a), count_ranks(b));
}

/// Textbook conjugate update, one observation at a time: prior N(m, v) and
/// observation k with variance s give N((m/v + k/s)/(1/v + 1/s), 1/(1/v + 1/s)).
inline double conjugate_posterior(double mu0, double var0, const std::vector<double>& k,
                                  const std::vector<double>& var) {
  double m = mu0;
  double v = var0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double post_var = 1.0 / (1.0 / v + 1.0 / var[i]);
    m = post_var * (m / v + k[i] / var[i]);
    v = post_var;
  }
  return m;
}

/// GELU through its integral definition x * Phi(x), Phi from std::erfc.
inline double gelu_ref(double x) { return x * 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Dense row-vector times matrix, y = x W + b, W stored [in x out].
inline std::vector<double> affine(const std::vector<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const std::size_t out = w.cols();
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    y[j] = b[j];
    for (std::size_t i = 0; i < x.size(); ++i) y[j] += x[i] * w.at(i, j);
  }
  return y;
}

}  // namespace oracle
