#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spivg/error.hpp"

// Evaluation: keyshot F1 against several annotators, tie-corrected rank
// correlations, and precision/recall for query-focused summaries.

namespace spivg::metrics {

using Mask = std::vector<std::uint8_t>;

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

enum class Reduce { kMax, kMean };

inline Reduce parse_reduce(std::string_view name) {
  if (name == "max") return Reduce::kMax;
  if (name == "mean") return Reduce::kMean;
  throw Error(ErrorCode::kInvalidArgument, "unknown reduction '" + std::string(name) + "'");
}

/// Precision/recall/F1 of one predicted mask against one user mask; 0/0 is 0.
inline PRF overlap(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> user) {
  if (pred.size() != user.size()) {
    throw Error(ErrorCode::kShapeMismatch, "f1: prediction length " + std::to_string(pred.size()) +
                                               " vs annotation length " + std::to_string(user.size()));
  }
  std::size_t hit = 0, np = 0, nu = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    np += pred[t] != 0;
    nu += user[t] != 0;
    hit += pred[t] != 0 && user[t] != 0;
  }
  PRF r;
  r.precision = np ? static_cast<double>(hit) / static_cast<double>(np) : 0.0;
  r.recall = nu ? static_cast<double>(hit) / static_cast<double>(nu) : 0.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0.0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

struct F1Result {
  double f1 = 0.0;
  std::vector<PRF> per_user;
};

inline F1Result f1_keyshot(std::span<const std::uint8_t> pred, const std::vector<Mask>& users, Reduce reduce) {
  if (users.empty()) throw Error(ErrorCode::kInvalidArgument, "f1: no user summaries");
  F1Result out;
  for (const auto& u : users) out.per_user.push_back(overlap(pred, u));
  if (reduce == Reduce::kMax) {
    for (const auto& p : out.per_user) out.f1 = std::max(out.f1, p.f1);
  } else {
    for (const auto& p : out.per_user) out.f1 += p.f1;
    out.f1 /= static_cast<double>(out.per_user.size());
  }
  return out;
}

/// P, R and F1 each averaged over annotations.
inline PRF qfvs_pr(std::span<const std::uint8_t> pred, const std::vector<Mask>& users) {
  const auto r = f1_keyshot(pred, users, Reduce::kMean);
  PRF avg;
  for (const auto& p : r.per_user) {
    avg.precision += p.precision;
    avg.recall += p.recall;
  }
  avg.precision /= static_cast<double>(users.size());
  avg.recall /= static_cast<double>(users.size());
  avg.f1 = r.f1;
  return avg;
}

namespace detail {

/// Number of pairs inside runs of equal values of a sorted range.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    It run = first;
    std::int64_t len = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++len;
    }
    total += len * (len - 1) / 2;
    first = run;
  }
  return total;
}

/// Merge sort on b that counts inversions (strictly greater before smaller).
inline std::int64_t count_swaps(std::vector<double>& b, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_swaps(b, buf, lo, mid) + count_swaps(b, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (b[j] < b[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = b[j++];
    } else {
      buf[k++] = b[i++];
    }
  }
  while (i < mid) buf[k++] = b[i++];
  while (j < hi) buf[k++] = b[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            b.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace detail

/// Kendall tau-b in O(n log n). Undefined (nullopt) when either side is constant.
inline std::optional<double> kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "kendall_tau: lengths differ");
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorCode::kSequenceTooShort, "kendall_tau: need at least two values");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] < a[j] || (a[i] == a[j] && b[i] < b[j]);
  });
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = detail::tied_pairs(order.begin(), order.end(),
                                             [&](std::size_t i, std::size_t j) { return a[i] == a[j]; });
  const std::int64_t n3 = detail::tied_pairs(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return a[i] == a[j] && b[i] == b[j];
  });
  std::vector<double> bs(n);
  for (std::size_t k = 0; k < n; ++k) bs[k] = b[order[k]];
  std::vector<double> buf(n);
  const std::int64_t swaps = detail::count_swaps(bs, buf, 0, n);
  const std::int64_t n2 = detail::tied_pairs(bs.begin(), bs.end(), [](double x, double y) { return x == y; });
  if (n0 == n1 || n0 == n2) return std::nullopt;
  // concordant - discordant = (n0 - n1 - n2 + n3) - 2 * swaps
  const std::int64_t numerator = n0 - n1 - n2 + n3 - 2 * swaps;
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return static_cast<double>(numerator) / denom;
}

/// Average ranks (1-based), ties sharing their mean rank.
inline std::vector<double> mid_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> ranks(n);
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    while (e < n && x[order[e]] == x[order[s]]) ++e;
    const double r = 0.5 * static_cast<double>(s + e - 1) + 1.0;
    for (std::size_t k = s; k < e; ++k) ranks[order[k]] = r;
    s = e;
  }
  return ranks;
}

inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

/// Spearman rho: Pearson correlation of mid-ranks.
inline std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "spearman_rho: lengths differ");
  if (a.size() < 2) throw Error(ErrorCode::kSequenceTooShort, "spearman_rho: need at least two values");
  const auto ra = mid_ranks(a);
  const auto rb = mid_ranks(b);
  return pearson(ra, rb);
}

/// Per-frame mean over annotators, the reference for rank correlations.
inline std::vector<double> mean_reference(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) return {};
  std::vector<double> out(scores.front().size(), 0.0);
  for (const auto& s : scores) {
    if (s.size() != out.size()) throw Error(ErrorCode::kShapeMismatch, "importance score lengths differ");
    for (std::size_t t = 0; t < s.size(); ++t) out[t] += s[t];
  }
  for (auto& v : out) v /= static_cast<double>(scores.size());
  return out;
}

}  // namespace spivg::metrics
