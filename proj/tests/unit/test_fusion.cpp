#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "spivg/fusion.hpp"

using namespace spivg;
using namespace spivg::fusion;
using grad::Tape;
using grad::Tensor;

namespace {

const Prior kFlat{0.0, 0.0, 0.0};

struct Instance {
  Prior prior;
  std::vector<ChannelObservation> obs;
};

Instance random_instance(Rng& rng, bool flat_y = true) {
  Instance in;
  const std::size_t n = rng.uniform_int(1, 8);
  const std::size_t channels = rng.uniform_int(1, 4);
  in.prior = {rng.uniform(-1, 1), rng.uniform(0.0, 2.0), flat_y ? 0.0 : rng.uniform(0.0, 1.0)};
  for (std::size_t i = 0; i < channels; ++i) {
    ChannelObservation o{std::vector<double>(n), std::exp(rng.uniform(-2, 2))};
    for (auto& v : o.k) v = rng.uniform(-1, 2);
    in.obs.push_back(o);
  }
  return in;
}

std::vector<double> elbo_numeric_gradient(const Instance& in, const std::vector<double>& q,
                                          const std::vector<double>& var, double h = 1e-5) {
  std::vector<double> g(q.size());
  for (std::size_t t = 0; t < q.size(); ++t) {
    auto up = q, down = q;
    up[t] += h;
    down[t] -= h;
    g[t] = (elbo_value(in.prior, in.obs, up, var) - elbo_value(in.prior, in.obs, down, var)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(DiffAbsMean, Examples) {
  const std::vector<double> k{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(diff_abs_mean(k, 1), 1.0);
  EXPECT_DOUBLE_EQ(diff_abs_mean(k, 2), 0.0);
  const std::vector<double> c(9, 0.7);
  for (int m = 1; m < 9; ++m) EXPECT_EQ(diff_abs_mean(c, m), 0.0);
  EXPECT_THROW(diff_abs_mean(k, 4), Error);
  EXPECT_THROW(diff_abs_mean(k, 0), Error);
}

TEST(DiffAbsMean, ReversalSymmetric) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> k(rng.uniform_int(4, 20));
    for (auto& v : k) v = rng.uniform(0, 1);
    std::vector<double> r(k.rbegin(), k.rend());
    for (int m = 1; m <= 3; ++m) EXPECT_NEAR(diff_abs_mean(k, m), diff_abs_mean(r, m), 1e-15);
  }
}

TEST(ChannelVariance, Examples) {
  const std::vector<int> orders{1, 2, 3};
  const std::vector<double> zeros(3, 0.0);
  const std::vector<double> k{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(channel_variance(zeros, 0.0, orders, k), 1.0);
  EXPECT_NEAR(channel_variance(zeros, std::log(4.0), orders, k), 4.0, 1e-12);
  EXPECT_NEAR(channel_variance(std::vector<double>{1.0}, 0.0, std::vector<int>{1}, k), std::exp(1.0), 1e-12);
  EXPECT_THROW(channel_variance(zeros, 0.0, std::vector<int>{1}, k), Error);
}

TEST(Posterior, Examples) {
  const std::vector<double> k{0.2, 0.9, 0.4};
  EXPECT_EQ(posterior_mean(kFlat, {{k, 0.7}}), k);
  EXPECT_EQ(posterior_mean(kFlat, {{{1.0}, 1.0}, {{0.0}, 1.0}}), (std::vector<double>{0.5}));
  EXPECT_NEAR(posterior_mean(kFlat, {{{1.0}, 1.0}, {{0.0}, 3.0}})[0], 0.75, 1e-15);
}

TEST(Posterior, Errors) {
  EXPECT_THROW(posterior_mean(kFlat, {}), Error);
  EXPECT_THROW(posterior_mean(kFlat, {{{1.0, 2.0}, 1.0}, {{0.0}, 1.0}}), Error);
  EXPECT_THROW(posterior_mean(kFlat, {{{1.0}, 0.0}}), Error);
}

TEST(Posterior, MatchesSequentialConjugateUpdates) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    auto in = random_instance(rng);
    in.prior.prior_precision = rng.uniform(0.01, 2.0);
    const auto mu = posterior_mean(in.prior, in.obs);
    for (std::size_t t = 0; t < mu.size(); ++t) {
      std::vector<double> k, var;
      for (const auto& o : in.obs) {
        k.push_back(o.k[t]);
        var.push_back(o.sigma_sq);
      }
      EXPECT_NEAR(mu[t], oracle::conjugate_posterior(in.prior.mu0, 1.0 / in.prior.prior_precision, k, var), 1e-9);
    }
  }
}

TEST(Posterior, ConvexCombinationBound) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto in = random_instance(rng);
    const auto mu = posterior_mean(in.prior, in.obs);
    for (std::size_t t = 0; t < mu.size(); ++t) {
      double lo = in.prior.prior_precision > 0 ? in.prior.mu0 : in.obs[0].k[t];
      double hi = lo;
      for (const auto& o : in.obs) {
        lo = std::min(lo, o.k[t]);
        hi = std::max(hi, o.k[t]);
      }
      EXPECT_GE(mu[t], lo - 1e-12);
      EXPECT_LE(mu[t], hi + 1e-12);
    }
  }
}

TEST(Posterior, PrecisionMonotonicity) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    auto in = random_instance(rng);
    const std::size_t j = rng.uniform_int(0, in.obs.size() - 1);
    const auto before = posterior_mean(in.prior, in.obs);
    in.obs[j].sigma_sq *= rng.uniform(0.1, 0.9);
    const auto after = posterior_mean(in.prior, in.obs);
    for (std::size_t t = 0; t < before.size(); ++t) {
      const double target = in.obs[j].k[t];
      EXPECT_LE(std::abs(after[t] - target), std::abs(before[t] - target) + 1e-12);
      if (std::abs(before[t] - target) > 1e-9) {
        EXPECT_LT(std::abs(after[t] - target), std::abs(before[t] - target));
      }
    }
  }
}

TEST(Posterior, AgreementFixedPoint) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double c = rng.uniform(-2, 2);
    const Prior prior{c, rng.uniform(0, 3), 0.0};
    std::vector<ChannelObservation> obs;
    for (int i = 0; i < 4; ++i) obs.push_back({std::vector<double>(6, c), std::exp(rng.uniform(-3, 3))});
    for (double v : posterior_mean(prior, obs)) EXPECT_NEAR(v, c, 1e-12);
  }
}

TEST(Posterior, ChannelPermutationInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto in = random_instance(rng);
    const auto base = posterior_mean(in.prior, in.obs);
    rng.shuffle(std::span<ChannelObservation>(in.obs));
    const auto perm = posterior_mean(in.prior, in.obs);
    for (std::size_t t = 0; t < base.size(); ++t) EXPECT_NEAR(base[t], perm[t], 1e-12);
  }
}

TEST(Elbo, StationaryAtPosterior) {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, false);
    const auto mu = posterior_mean(in.prior, in.obs);
    const std::vector<double> var(mu.size(), 0.3);
    for (double g : elbo_numeric_gradient(in, mu, var)) EXPECT_LE(std::abs(g), 1e-6);
  }
}

TEST(Elbo, PerturbationLowersObjective) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, false);
    const auto mu = posterior_mean(in.prior, in.obs);
    const std::vector<double> var(mu.size(), 1.0);
    const double at = elbo_value(in.prior, in.obs, mu, var);
    const std::size_t t = rng.uniform_int(0, mu.size() - 1);
    auto moved = mu;
    moved[t] += 0.1;
    // Concave quadratic: the slope at mu + 0.1 points back toward mu.
    EXPECT_LT(elbo_value(in.prior, in.obs, moved, var), at);
    EXPECT_LT(elbo_numeric_gradient(in, moved, var)[t], 0.0);
  }
}

TEST(Elbo, GridArgmaxSingleObservation) {
  const std::vector<double> k{0.37, -0.52, 1.13};
  const std::vector<ChannelObservation> obs{{k, 0.8}};
  for (std::size_t t = 0; t < k.size(); ++t) {
    double best = -1e300, arg = 0.0;
    for (int g = -3000; g <= 3000; ++g) {
      std::vector<double> q{k[0], k[1], k[2]};
      q[t] = g * 1e-3;
      const double v = elbo_value(kFlat, obs, q, std::vector<double>(3, 1.0));
      if (v > best) {
        best = v;
        arg = q[t];
      }
    }
    EXPECT_NEAR(arg, k[t], 1e-3);
  }
}

TEST(Elbo, GradientAscentFindsPosterior) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_instance(rng, false);
    const std::size_t n = in.obs[0].k.size();
    std::vector<double> q(n, 0.0);
    const std::vector<double> var(n, 0.5);
    // Curvature from a second difference of the objective, then fixed-step ascent.
    std::vector<double> e0(n, 0.0), e1(n, 0.0), e2(n, 0.0);
    e1[0] = 1.0;
    e2[0] = 2.0;
    const double curv = -(elbo_value(in.prior, in.obs, e2, var) - 2 * elbo_value(in.prior, in.obs, e1, var) +
                          elbo_value(in.prior, in.obs, e0, var));
    const double step = 0.5 / curv;
    for (int it = 0; it < 200; ++it) {
      const auto g = elbo_numeric_gradient(in, q, var);
      for (std::size_t t = 0; t < n; ++t) q[t] += step * g[t];
    }
    const auto mu = posterior_mean(in.prior, in.obs);
    for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(q[t], mu[t], 1e-6);
  }
}

TEST(Module, ZeroInitGivesUnitVariances) {
  FusionModule<double> m(FusionConfig{}, 4);
  Rng rng(1);
  std::vector<std::vector<double>> ch(4, std::vector<double>(10));
  for (auto& c : ch) {
    for (auto& v : c) v = rng.uniform();
  }
  for (double v : m.variances(ch)) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Module, TapeMatchesPlainPosterior) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    FusionConfig cfg;
    cfg.mu0 = rng.uniform(0, 1);
    cfg.sigma0_sq = rng.uniform(0.5, 20);
    cfg.sigmay_inv = trial % 2 ? rng.uniform(0, 1) : 0.0;
    FusionModule<double> m(cfg, 3);
    for (auto& v : m.w.data()) v = rng.uniform(-1, 1);
    for (auto& v : m.b.data()) v = rng.uniform(-1, 1);
    const std::size_t n = rng.uniform_int(4, 12);
    std::vector<std::vector<double>> ch(3, std::vector<double>(n));
    for (auto& c : ch) {
      for (auto& v : c) v = rng.uniform();
    }
    const auto var = m.variances(ch);
    std::vector<ChannelObservation> obs;
    for (std::size_t i = 0; i < 3; ++i) obs.push_back({ch[i], var[i]});
    const auto want = posterior_mean(Prior::from(cfg), obs);
    Tape<double> tape;
    std::vector<grad::Var<double>> vars;
    for (const auto& c : ch) vars.push_back(tape.constant(Tensor<double>::vector(c)));
    const auto got = m(vars).value();
    for (std::size_t t = 0; t < n; ++t) EXPECT_NEAR(got[t], want[t], 1e-12);
  }
}

TEST(Module, GradientMatchesFiniteDifference) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 500);
    FusionConfig cfg;
    cfg.sigmay_inv = rng.uniform(0, 0.5);
    const std::size_t n = rng.uniform_int(5, 10);
    const auto probe = oracle::random_tensor({n}, rng);
    std::vector<Tensor<double>> inputs{oracle::random_tensor({3}, rng), oracle::random_tensor({4}, rng)};
    for (int i = 0; i < 4; ++i) inputs.push_back(oracle::random_tensor({n}, rng, 0.0, 1.0));
    worst = std::max(worst, oracle::gradcheck(inputs, [&](auto& tape, const auto& v) {
      std::vector<grad::Var<double>> ch(v.begin() + 2, v.end());
      auto mu = FusionModule<double>::posterior(v[0], v[1], ch, cfg);
      return grad::sum(grad::hadamard(mu, tape.constant(probe)));
    }, 1e-6));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Module, BoundParametersReceiveGradient) {
  FusionModule<double> m(FusionConfig{}, 2);
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>::vector({0.1, 0.9, 0.2, 0.8, 0.5}));
  auto b = tape.constant(Tensor<double>::vector({0.3, 0.3, 0.4, 0.3, 0.2}));
  tape.backward(grad::sum(m({a, b})));
  double mass = 0.0;
  for (double g : m.b.grad()) mass += std::abs(g);
  EXPECT_GT(mass, 0.0);
  EXPECT_THROW(m({a}), Error);
}

TEST(Module, ShortChannelRejected) {
  FusionModule<double> m(FusionConfig{}, 1);
  Tape<double> tape;
  EXPECT_THROW(m({tape.constant(Tensor<double>::vector({0.1, 0.2, 0.3}))}), Error);
}

TEST(FusionConfig, Validation) {
  FusionConfig c;
  c.orders = {};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.sigma0_sq = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.sigmay_inv = -1.0;
  EXPECT_THROW(c.validate(), Error);
}
