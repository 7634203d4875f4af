#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "spivg/metrics.hpp"

using namespace spivg;
using namespace spivg::metrics;

namespace {

Mask random_mask(std::size_t n, double p, Rng& rng) {
  Mask m(n);
  for (auto& v : m) v = rng.uniform() < p;
  return m;
}

std::vector<double> tied_scores(std::size_t n, int levels, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.uniform_int(0, levels - 1));
  return v;
}

}  // namespace

TEST(F1, Examples) {
  const Mask u{1, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(f1_keyshot(u, {u}, Reduce::kMax).f1, 1.0);
  EXPECT_DOUBLE_EQ(f1_keyshot(Mask{0, 1, 0, 0, 1}, {u}, Reduce::kMax).f1, 0.0);
  const auto r = f1_keyshot(Mask{1, 1, 0, 0}, {Mask{1, 0, 1, 0}}, Reduce::kMean);
  EXPECT_DOUBLE_EQ(r.per_user[0].precision, 0.5);
  EXPECT_DOUBLE_EQ(r.per_user[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(F1, ZeroOverZeroIsZero) {
  const auto p = overlap(Mask{0, 0, 0}, Mask{0, 0, 0});
  EXPECT_EQ(p.precision, 0.0);
  EXPECT_EQ(p.recall, 0.0);
  EXPECT_EQ(p.f1, 0.0);
}

TEST(F1, Errors) {
  EXPECT_THROW(f1_keyshot(Mask{1, 0}, {}, Reduce::kMax), Error);
  EXPECT_THROW(f1_keyshot(Mask{1, 0}, {Mask{1, 0, 0}}, Reduce::kMax), Error);
  EXPECT_EQ(parse_reduce("mean"), Reduce::kMean);
  EXPECT_THROW(parse_reduce("median"), Error);
}

TEST(F1, MaxDominatesMeanAndStaysInRange) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = rng.uniform_int(1, 40);
    const auto pred = random_mask(n, rng.uniform(), rng);
    std::vector<Mask> users;
    for (std::size_t u = 0, k = rng.uniform_int(1, 5); u < k; ++u) users.push_back(random_mask(n, rng.uniform(), rng));
    const double mx = f1_keyshot(pred, users, Reduce::kMax).f1;
    const double mn = f1_keyshot(pred, users, Reduce::kMean).f1;
    EXPECT_GE(mx, mn - 1e-15);
    EXPECT_GE(mn, 0.0);
    EXPECT_LE(mx, 1.0);
    bool exact = false;
    for (const auto& u : users) exact |= (u == pred && std::count(u.begin(), u.end(), 1) > 0);
    EXPECT_EQ(mx == 1.0, exact);
  }
}

TEST(Qfvs, Examples) {
  const Mask u{0, 1, 1, 0, 0, 1};
  const auto same = qfvs_pr(u, {u});
  EXPECT_EQ(same.precision, 1.0);
  EXPECT_EQ(same.recall, 1.0);
  EXPECT_EQ(same.f1, 1.0);
  const auto all = qfvs_pr(Mask(6, 1), {u});
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_DOUBLE_EQ(all.precision, 0.5);
  // pred {0,1,2} vs users {1,2,5} and {0,3}: P = (2/3 + 1/3)/2, R = (2/3 + 1/2)/2.
  const auto hand = qfvs_pr(Mask{1, 1, 1, 0, 0, 0}, {u, Mask{1, 0, 0, 1, 0, 0}});
  EXPECT_DOUBLE_EQ(hand.precision, 0.5);
  EXPECT_DOUBLE_EQ(hand.recall, (2.0 / 3.0 + 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(hand.f1, (2.0 / 3.0 + 0.4) / 2.0);
}

TEST(Kendall, Examples) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  const std::vector<double> r{5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(*kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(*kendall_tau(a, r), -1.0);
  EXPECT_FALSE(kendall_tau(a, std::vector<double>(5, 0.3)).has_value());
  EXPECT_FALSE(kendall_tau(std::vector<double>(5, 1.0), a).has_value());
  EXPECT_THROW(kendall_tau(std::vector<double>{1.0}, std::vector<double>{1.0}), Error);
  EXPECT_THROW(kendall_tau(a, std::vector<double>{1, 2}), Error);
}

TEST(Kendall, MatchesPairCounting) {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = trial < 100 ? 50 : rng.uniform_int(2, 120);
    const bool ties = trial % 2;
    std::vector<double> a(n), b(n);
    if (ties) {
      a = tied_scores(n, 4, rng);
      b = tied_scores(n, 5, rng);
    } else {
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.normal();
    }
    const auto got = kendall_tau(a, b);
    const double want = oracle::kendall_pairs(a, b);
    if (std::isnan(want)) {
      EXPECT_FALSE(got.has_value());
    } else {
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, want, 1e-12);
    }
  }
}

TEST(Spearman, Examples) {
  const std::vector<double> a{0.1, 0.4, 0.2, 0.9};
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
  EXPECT_NEAR(*spearman_rho(a, a), 1.0, 1e-15);
  EXPECT_NEAR(*spearman_rho(a, r), -1.0, 1e-15);
  EXPECT_FALSE(spearman_rho(a, std::vector<double>(4, 2.0)).has_value());
  EXPECT_EQ(mid_ranks(std::vector<double>{3, 1, 3, 2}), (std::vector<double>{3.5, 1, 3.5, 2}));
}

TEST(Spearman, MatchesDefinitionWithTies) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.uniform_int(3, 60);
    const auto a = tied_scores(n, 6, rng);
    const auto b = tied_scores(n, 3, rng);
    const auto got = spearman_rho(a, b);
    const double want = oracle::spearman_definition(a, b);
    if (std::isnan(want)) {
      EXPECT_FALSE(got.has_value());
    } else {
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, want, 1e-9);
    }
  }
}

TEST(RankCorrelation, MonotoneTransformInvariantAndSymmetric) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = rng.uniform_int(2, 40);
    const auto a = tied_scores(n, 7, rng);
    std::vector<double> b(n);
    for (auto& v : b) v = rng.uniform();
    std::vector<double> ta(n), tb(n);
    for (std::size_t i = 0; i < n; ++i) {
      ta[i] = std::exp(a[i]) + 3.0;
      tb[i] = std::pow(b[i], 3) * 10.0 - 1.0;
    }
    const auto k = kendall_tau(a, b);
    const auto kt = kendall_tau(ta, tb);
    const auto ks = kendall_tau(b, a);
    ASSERT_EQ(k.has_value(), kt.has_value());
    ASSERT_EQ(k.has_value(), ks.has_value());
    if (k) {
      EXPECT_NEAR(*k, *kt, 1e-12);
      EXPECT_NEAR(*k, *ks, 1e-12);
    }
    const auto s = spearman_rho(a, b);
    const auto st = spearman_rho(ta, tb);
    const auto ss = spearman_rho(b, a);
    ASSERT_EQ(s.has_value(), st.has_value());
    if (s) {
      EXPECT_NEAR(*s, *st, 1e-12);
      EXPECT_NEAR(*s, *ss, 1e-12);
      EXPECT_LE(std::abs(*s), 1.0 + 1e-12);
    }
  }
}

TEST(MeanReference, Average) {
  EXPECT_EQ(mean_reference({{1, 2}, {3, 4}}), (std::vector<double>{2, 3}));
  EXPECT_TRUE(mean_reference({}).empty());
  EXPECT_THROW(mean_reference({{1, 2}, {3}}), Error);
}
