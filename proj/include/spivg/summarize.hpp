#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/tensor.hpp"

// Keyshot summary assembly: kernel temporal segmentation into shots, mean shot
// scores, and exact 0/1 knapsack selection under a frame budget.

namespace spivg::summarize {

struct Shot {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
};

/// Boundaries b_0 = 0 < b_1 < ... < b_m = T; shot s is [b_s, b_{s+1}).
struct ShotSegmentation {
  std::vector<std::size_t> boundaries;

  std::size_t n_shots() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
  std::vector<Shot> shots() const {
    std::vector<Shot> out;
    for (std::size_t s = 0; s + 1 < boundaries.size(); ++s) out.push_back({boundaries[s], boundaries[s + 1]});
    return out;
  }
  std::vector<std::size_t> lengths() const {
    std::vector<std::size_t> out;
    for (const auto& s : shots()) out.push_back(s.length());
    return out;
  }
};

/// Within-segment scatter under the linear kernel, from prefix sums of the Gram
/// matrix: cost(a, b) = sum_{t in [a,b)} K_tt - (1/(b-a)) sum_{s,t in [a,b)} K_st.
class ScatterCost {
 public:
  template <typename T>
  explicit ScatterCost(const grad::Tensor<T>& x) : n_(x.rows()) {
    if (x.rank() != 2 || n_ == 0) throw Error(ErrorCode::kShapeMismatch, "kts: expected a nonempty T x d matrix");
    const std::size_t d = x.cols();
    // Prefix sums along the time axis of the features give block sums of K in
    // O(d) per query; the Gram block sum of [a,b) equals |sum_{t in [a,b)} x_t|^2.
    prefix_.assign((n_ + 1) * d, 0.0);
    diag_.assign(n_ + 1, 0.0);
    for (std::size_t t = 0; t < n_; ++t) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double v = x.at(t, c);
        prefix_[(t + 1) * d + c] = prefix_[t * d + c] + v;
        sq += v * v;
      }
      diag_[t + 1] = diag_[t] + sq;
    }
    d_ = d;
  }

  std::size_t size() const { return n_; }

  double operator()(std::size_t a, std::size_t b) const {
    double block = 0.0;
    for (std::size_t c = 0; c < d_; ++c) {
      const double s = prefix_[b * d_ + c] - prefix_[a * d_ + c];
      block += s * s;
    }
    return std::max(0.0, diag_[b] - diag_[a] - block / static_cast<double>(b - a));
  }

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> prefix_;
  std::vector<double> diag_;
};

struct KtsResult {
  ShotSegmentation segmentation;
  double objective = 0.0;  // scatter + penalty * n_segments
  bool clamped = false;    // max_segments exceeded T
};

/// Default per-segment penalty d * log T.
inline double default_kts_penalty(std::size_t n_frames, std::size_t dim) {
  return static_cast<double>(dim) * std::log(static_cast<double>(std::max<std::size_t>(n_frames, 2)));
}

/// Exact DP over all boundary positions for at most max_segments segments.
/// Ties go to fewer segments.
template <typename T>
KtsResult kts_segment(const grad::Tensor<T>& x, std::size_t max_segments, double penalty) {
  if (max_segments < 1) throw Error(ErrorCode::kInvalidArgument, "kts: max_segments must be >= 1");
  const ScatterCost cost(x);
  const std::size_t n = cost.size();
  KtsResult result;
  if (max_segments > n) {
    result.clamped = true;
    max_segments = n;
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // best[m][j]: minimal scatter of frames [0, j) split into m segments.
  std::vector<std::vector<double>> best(max_segments + 1, std::vector<double>(n + 1, kInf));
  std::vector<std::vector<std::size_t>> arg(max_segments + 1, std::vector<std::size_t>(n + 1, 0));
  best[0][0] = 0.0;
  for (std::size_t m = 1; m <= max_segments; ++m) {
    for (std::size_t j = m; j <= n; ++j) {
      for (std::size_t i = m - 1; i < j; ++i) {
        if (best[m - 1][i] == kInf) continue;
        const double c = best[m - 1][i] + cost(i, j);
        if (c < best[m][j]) {
          best[m][j] = c;
          arg[m][j] = i;
        }
      }
    }
  }
  std::size_t best_m = 1;
  double best_obj = kInf;
  for (std::size_t m = 1; m <= max_segments; ++m) {
    const double obj = best[m][n] + penalty * static_cast<double>(m);
    if (obj < best_obj) {
      best_obj = obj;
      best_m = m;
    }
  }
  std::vector<std::size_t> bounds{n};
  for (std::size_t m = best_m, j = n; m > 0; --m) {
    j = arg[m][j];
    bounds.push_back(j);
  }
  std::reverse(bounds.begin(), bounds.end());
  result.segmentation.boundaries = std::move(bounds);
  result.objective = best_obj;
  return result;
}

/// Mean frame score of every shot.
inline std::vector<double> shot_scores(std::span<const double> frame_scores, const ShotSegmentation& seg) {
  if (seg.boundaries.empty() || seg.boundaries.back() != frame_scores.size()) {
    throw Error(ErrorCode::kShapeMismatch, "shot_scores: segmentation does not cover the score sequence");
  }
  std::vector<double> out;
  for (const auto& shot : seg.shots()) {
    double s = 0.0;
    for (std::size_t t = shot.begin; t < shot.end; ++t) s += frame_scores[t];
    out.push_back(s / static_cast<double>(shot.length()));
  }
  return out;
}

struct KnapsackResult {
  std::vector<std::uint8_t> selected;
  double value = 0.0;
  std::size_t frames = 0;
};

/// Exact 0/1 knapsack over integer lengths. Among optimal-value selections the
/// one with fewest frames wins, then the one taking lower shot indices.
inline KnapsackResult knapsack_select(std::span<const double> scores, std::span<const std::size_t> lengths,
                                      std::size_t budget) {
  if (scores.size() != lengths.size()) {
    throw Error(ErrorCode::kShapeMismatch, "knapsack: scores and lengths differ in size");
  }
  const std::size_t n = scores.size();
  struct Cell {
    double value = 0.0;
    std::size_t frames = 0;
  };
  auto better = [](const Cell& a, const Cell& b) {
    return a.value > b.value || (a.value == b.value && a.frames < b.frames);
  };
  // best[i][c]: optimum over items i..n-1 with capacity c.
  std::vector<std::vector<Cell>> best(n + 1, std::vector<Cell>(budget + 1));
  for (std::size_t i = n; i-- > 0;) {
    if (lengths[i] == 0) throw Error(ErrorCode::kInvalidArgument, "knapsack: shot lengths must be positive");
    for (std::size_t c = 0; c <= budget; ++c) {
      Cell skip = best[i + 1][c];
      if (lengths[i] <= c) {
        const Cell& rest = best[i + 1][c - lengths[i]];
        const Cell take{scores[i] + rest.value, lengths[i] + rest.frames};
        best[i][c] = better(skip, take) ? skip : take;
      } else {
        best[i][c] = skip;
      }
    }
  }
  KnapsackResult result;
  result.selected.assign(n, 0);
  result.value = best[0][budget].value;
  result.frames = best[0][budget].frames;
  std::size_t c = budget;
  for (std::size_t i = 0; i < n; ++i) {
    if (lengths[i] > c) continue;
    const Cell& rest = best[i + 1][c - lengths[i]];
    const Cell take{scores[i] + rest.value, lengths[i] + rest.frames};
    if (!better(best[i + 1][c], take)) {
      result.selected[i] = 1;
      c -= lengths[i];
    }
  }
  return result;
}

inline std::size_t budget_frames(double budget_fraction, std::size_t n_frames) {
  return static_cast<std::size_t>(std::floor(budget_fraction * static_cast<double>(n_frames) + 1e-9));
}

struct SummaryConfig {
  double budget = 0.15;
  std::optional<double> kts_penalty;            // default: d log T
  std::optional<std::size_t> kts_max_segments;  // default: max(1, T / 4)

  void validate() const {
    if (!(budget > 0.0 && budget <= 1.0)) throw Error(ErrorCode::kConfig, "summary: budget must be in (0, 1]");
    if (kts_penalty && !(*kts_penalty >= 0.0)) throw Error(ErrorCode::kConfig, "summary: kts_penalty must be >= 0");
    if (kts_max_segments && *kts_max_segments < 1) {
      throw Error(ErrorCode::kConfig, "summary: kts_max_segments must be >= 1");
    }
  }

  std::size_t max_segments_for(std::size_t n_frames) const {
    return kts_max_segments ? *kts_max_segments : std::max<std::size_t>(1, n_frames / 4);
  }
};

struct SummaryResult {
  std::vector<double> frame_scores;
  ShotSegmentation segmentation;
  std::vector<double> shot_scores;
  std::vector<std::uint8_t> selected;
  std::vector<std::uint8_t> frame_mask;
  double budget_fraction = 0.15;
  bool kts_clamped = false;
};

/// Shot scoring and knapsack selection over a fixed segmentation.
inline SummaryResult select_shots(ShotSegmentation segmentation, std::span<const double> frame_scores,
                                  double budget_fraction) {
  SummaryResult out;
  out.frame_scores.assign(frame_scores.begin(), frame_scores.end());
  out.segmentation = std::move(segmentation);
  out.budget_fraction = budget_fraction;
  out.shot_scores = shot_scores(frame_scores, out.segmentation);
  const auto lengths = out.segmentation.lengths();
  const std::size_t n = frame_scores.size();
  out.selected = knapsack_select(out.shot_scores, lengths, budget_frames(budget_fraction, n)).selected;
  out.frame_mask.assign(n, 0);
  const auto shots = out.segmentation.shots();
  for (std::size_t s = 0; s < shots.size(); ++s) {
    if (!out.selected[s]) continue;
    for (std::size_t t = shots[s].begin; t < shots[s].end; ++t) out.frame_mask[t] = 1;
  }
  return out;
}

/// KTS segmentation of the features for `cfg`.
template <typename T>
KtsResult segment_for(const grad::Tensor<T>& x, const SummaryConfig& cfg) {
  const std::size_t n = x.rows();
  const double penalty = cfg.kts_penalty ? *cfg.kts_penalty : default_kts_penalty(n, x.cols());
  return kts_segment(x, cfg.max_segments_for(n), penalty);
}

template <typename T>
SummaryResult assemble_summary(const grad::Tensor<T>& x, std::span<const double> frame_scores,
                               const SummaryConfig& cfg) {
  cfg.validate();
  if (x.rank() != 2 || x.rows() != frame_scores.size()) {
    throw Error(ErrorCode::kShapeMismatch, "assemble_summary: " + std::to_string(frame_scores.size()) +
                                               " scores for features " + grad::shape_str(x.shape()));
  }
  KtsResult kts = segment_for(x, cfg);
  SummaryResult out = select_shots(std::move(kts.segmentation), frame_scores, cfg.budget);
  out.kts_clamped = kts.clamped;
  return out;
}

}  // namespace spivg::summarize
