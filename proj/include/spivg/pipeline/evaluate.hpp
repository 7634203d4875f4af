#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "spivg/error.hpp"
#include "spivg/fusion.hpp"
#include "spivg/metrics.hpp"
#include "spivg/pipeline/feature_store.hpp"
#include "spivg/pipeline/model.hpp"
#include "spivg/pipeline/train.hpp"
#include "spivg/summarize.hpp"

namespace spivg::pipeline {

enum class QueryMode { kAll, kNone, kNamed };

struct QuerySelection {
  QueryMode mode = QueryMode::kAll;
  std::string name;
};

inline std::vector<std::vector<float>> select_queries(const VideoRecord& v, const QuerySelection& sel) {
  switch (sel.mode) {
    case QueryMode::kAll: return all_queries(v);
    case QueryMode::kNone: return {};
    case QueryMode::kNamed: {
      const Query* q = v.find_query(sel.name);
      if (q == nullptr) throw Error(ErrorCode::kNotFound, "video '" + v.id + "' has no query '" + sel.name + "'");
      return {q->vector};
    }
  }
  return {};
}

struct InferResult {
  std::string video_id;
  std::array<std::vector<double>, kChannels> channels;
  std::vector<double> fused;
  summarize::SummaryResult summary;
};

inline std::vector<double> to_doubles(const grad::Tensor<float>& t) { return {t.data().begin(), t.data().end()}; }

/// Forward pass in inference mode (no dropout, hard spikes). Reads the model only.
inline InferResult infer(Model<float>& model, const VideoRecord& video, const QuerySelection& queries,
                         const summarize::SummaryConfig& summary) {
  grad::Tape<float> tape;
  const auto out = model.forward(tape, video.features, select_queries(video, queries));
  InferResult r;
  r.video_id = video.id;
  for (std::size_t c = 0; c < kChannels; ++c) r.channels[c] = to_doubles(out.channels[c].value());
  r.fused = to_doubles(out.fused.value());
  r.summary = summarize::assemble_summary(video.features, r.fused, summary);
  return r;
}

inline nlohmann::json to_json(const InferResult& r) {
  nlohmann::json ch = nlohmann::json::array();
  for (const auto& c : r.channels) ch.push_back(c);
  return {{"video_id", r.video_id},
          {"fused", r.fused},
          {"channels", ch},
          {"shot_boundaries", r.summary.segmentation.boundaries},
          {"shot_scores", r.summary.shot_scores},
          {"selected", r.summary.selected},
          {"frame_mask", r.summary.frame_mask},
          {"budget_fraction", r.summary.budget_fraction}};
}

/// Worker count from SPIVG_THREADS (default 1).
inline std::size_t threads_from_env() {
  const char* v = std::getenv("SPIVG_THREADS");
  if (v == nullptr) return 1;
  const long n = std::strtol(v, nullptr, 10);
  return n > 0 ? static_cast<std::size_t>(n) : 1;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots so the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

enum class Protocol { kStandard, kQfvs };

inline Protocol parse_protocol(std::string_view name) {
  if (name == "standard" || name == "default") return Protocol::kStandard;
  if (name == "qfvs") return Protocol::kQfvs;
  throw Error(ErrorCode::kInvalidArgument, "unknown protocol '" + std::string(name) + "'");
}

inline std::string_view to_string(Protocol p) { return p == Protocol::kQfvs ? "qfvs" : "standard"; }

inline int protocol_folds(Protocol p, int configured) { return p == Protocol::kQfvs ? 4 : configured; }

struct VideoMetrics {
  std::string id;
  double f1_max = 0.0;
  double f1_mean = 0.0;
  std::optional<double> tau;
  std::optional<double> rho;
  std::optional<metrics::PRF> qfvs;
};

struct EvalReport {
  std::string dataset;
  std::string protocol = "standard";
  int fold = 0;
  int n_folds = 5;
  std::vector<VideoMetrics> videos;
  double f1_max = 0.0;
  double f1_mean = 0.0;
  std::optional<double> tau;
  std::optional<double> rho;
  std::optional<metrics::PRF> qfvs;

  /// SumMe is conventionally reported with max reduction, the rest with mean.
  std::string headline_reduce() const {
    std::string lower = dataset;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    return lower == "summe" ? "max" : "mean";
  }
  double headline_f1() const { return headline_reduce() == "max" ? f1_max : f1_mean; }
};

inline nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json prf_json(const std::optional<metrics::PRF>& p) {
  if (!p) return nullptr;
  return {{"precision", p->precision}, {"recall", p->recall}, {"f1", p->f1}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json videos = nlohmann::json::array();
  for (const auto& v : r.videos) {
    videos.push_back({{"id", v.id},
                      {"f1_max", v.f1_max},
                      {"f1_mean", v.f1_mean},
                      {"kendall_tau", optional_number(v.tau)},
                      {"spearman_rho", optional_number(v.rho)},
                      {"qfvs", prf_json(v.qfvs)}});
  }
  return {{"dataset", r.dataset},
          {"protocol", r.protocol},
          {"fold", r.fold},
          {"n_folds", r.n_folds},
          {"f1_max", r.f1_max},
          {"f1_mean", r.f1_mean},
          {"f1", r.headline_f1()},
          {"f1_reduce", r.headline_reduce()},
          {"kendall_tau", optional_number(r.tau)},
          {"spearman_rho", optional_number(r.rho)},
          {"qfvs", prf_json(r.qfvs)},
          {"videos", videos}};
}

/// Aligned-column text rendering of a report.
inline std::string to_table(const EvalReport& r) {
  auto num = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    std::ostringstream os;
    os << std::fixed << std::setprecision(4) << *v;
    return os.str();
  };
  std::size_t w = 8;
  for (const auto& v : r.videos) w = std::max(w, v.id.size() + 2);
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "video" << std::setw(10) << "f1_max" << std::setw(10)
     << "f1_mean" << std::setw(11) << "tau" << std::setw(11) << "rho" << "\n";
  auto row = [&](const std::string& name, double fmax, double fmean, const std::optional<double>& tau,
                 const std::optional<double>& rho) {
    os << std::left << std::setw(static_cast<int>(w)) << name << std::setw(10) << num(fmax) << std::setw(10)
       << num(fmean) << std::setw(11) << num(tau) << std::setw(11) << num(rho) << "\n";
  };
  for (const auto& v : r.videos) row(v.id, v.f1_max, v.f1_mean, v.tau, v.rho);
  row("mean", r.f1_max, r.f1_mean, r.tau, r.rho);
  if (r.qfvs) {
    os << "qfvs precision " << num(r.qfvs->precision) << "  recall " << num(r.qfvs->recall) << "  f1 "
       << num(r.qfvs->f1) << "\n";
  }
  return os.str();
}

/// Metrics of one predicted summary against the video's annotations.
inline VideoMetrics score_video(const VideoRecord& v, std::span<const std::uint8_t> mask,
                                std::span<const double> frame_scores) {
  VideoMetrics m;
  m.id = v.id;
  const auto& users = v.annotations.user_summaries;
  if (users.empty()) throw Error(ErrorCode::kInvalidArgument, "video '" + v.id + "' has no user summaries");
  m.f1_max = metrics::f1_keyshot(mask, users, metrics::Reduce::kMax).f1;
  m.f1_mean = metrics::f1_keyshot(mask, users, metrics::Reduce::kMean).f1;
  if (!v.annotations.importance_scores.empty()) {
    const auto ref = metrics::mean_reference(v.annotations.importance_scores);
    m.tau = metrics::kendall_tau(frame_scores, ref);
    m.rho = metrics::spearman_rho(frame_scores, ref);
  }
  if (!v.queries.empty()) m.qfvs = metrics::qfvs_pr(mask, users);
  return m;
}

/// Averages per-video metrics; undefined correlations are left out of the mean.
inline void aggregate(EvalReport& r) {
  if (r.videos.empty()) return;
  const auto n = static_cast<double>(r.videos.size());
  double tau = 0.0, rho = 0.0;
  std::size_t n_tau = 0, n_rho = 0, n_q = 0;
  metrics::PRF q;
  r.f1_max = r.f1_mean = 0.0;
  for (const auto& v : r.videos) {
    r.f1_max += v.f1_max / n;
    r.f1_mean += v.f1_mean / n;
    if (v.tau) {
      tau += *v.tau;
      ++n_tau;
    }
    if (v.rho) {
      rho += *v.rho;
      ++n_rho;
    }
    if (v.qfvs) {
      q.precision += v.qfvs->precision;
      q.recall += v.qfvs->recall;
      q.f1 += v.qfvs->f1;
      ++n_q;
    }
  }
  r.tau = n_tau ? std::optional<double>(tau / static_cast<double>(n_tau)) : std::nullopt;
  r.rho = n_rho ? std::optional<double>(rho / static_cast<double>(n_rho)) : std::nullopt;
  if (n_q) {
    const auto k = static_cast<double>(n_q);
    r.qfvs = metrics::PRF{q.precision / k, q.recall / k, q.f1 / k};
  }
}

using ScoreFn = std::function<std::vector<double>(const VideoRecord&)>;

/// Summarizes each listed video from `scores` and evaluates the result.
inline EvalReport evaluate_scores(const FeatureStore& store, const std::vector<std::size_t>& videos,
                                  const ScoreFn& scores, const summarize::SummaryConfig& summary,
                                  std::size_t threads = 1) {
  if (videos.empty()) throw Error(ErrorCode::kInvalidArgument, "evaluate: empty test fold");
  EvalReport r;
  r.dataset = store.dataset;
  r.videos.resize(videos.size());
  parallel_for(videos.size(), threads, [&](std::size_t k) {
    const VideoRecord& v = store.videos[videos[k]];
    const auto s = scores(v);
    const auto result = summarize::assemble_summary(v.features, s, summary);
    r.videos[k] = score_video(v, result.frame_mask, s);
  });
  aggregate(r);
  return r;
}

struct EvalOptions {
  Protocol protocol = Protocol::kStandard;
  int fold = 0;
  int n_folds = 5;
  std::uint64_t seed = 0;
  QuerySelection queries;
  std::size_t threads = 1;
};

/// Evaluates a model on the held-out fold of `store`.
inline EvalReport evaluate(Model<float>& model, const FeatureStore& store, const summarize::SummaryConfig& summary,
                           const EvalOptions& opts) {
  const Split split = split_for(store, opts.n_folds, opts.fold, opts.seed);
  auto report = evaluate_scores(
      store, split.test,
      [&](const VideoRecord& v) {
        grad::Tape<float> tape;
        return to_doubles(model.forward(tape, v.features, select_queries(v, opts.queries)).fused.value());
      },
      summary, opts.threads);
  report.protocol = std::string(to_string(opts.protocol));
  report.fold = opts.fold;
  report.n_folds = opts.n_folds;
  return report;
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

/// Mean F1 (mean reduction) of uniform-random frame scores over `trials` draws.
/// Segmentation does not depend on scores, so each video is segmented once.
inline double random_baseline_f1(const FeatureStore& store, const std::vector<std::size_t>& videos, int trials,
                                 std::uint64_t seed, const summarize::SummaryConfig& summary,
                                 std::size_t threads = 1) {
  if (trials < 1) throw Error(ErrorCode::kInvalidArgument, "baseline: trials must be >= 1");
  if (videos.empty()) throw Error(ErrorCode::kInvalidArgument, "evaluate: empty test fold");
  summary.validate();
  std::vector<double> per_video(videos.size(), 0.0);
  parallel_for(videos.size(), threads, [&](std::size_t k) {
    const VideoRecord& v = store.videos[videos[k]];
    const auto seg = summarize::segment_for(v.features, summary).segmentation;
    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(trial), fnv1a(v.id)));
      std::vector<double> s(v.n_frames());
      for (auto& x : s) x = rng.uniform();
      const auto result = summarize::select_shots(seg, s, summary.budget);
      per_video[k] += metrics::f1_keyshot(result.frame_mask, v.annotations.user_summaries, metrics::Reduce::kMean).f1;
    }
  });
  double total = 0.0;
  for (double f : per_video) total += f / static_cast<double>(trials);
  return total / static_cast<double>(videos.size());
}

/// One CSV row per (video, frame): channel scores, their plain mean, and the
/// fused score.
inline void export_channels(Model<float>& model, const FeatureStore& store, const QuerySelection& queries,
                            std::ostream& out) {
  out << "video_id,frame";
  for (std::size_t c = 0; c < kChannels; ++c) out << ",ch_" << c;
  out << ",av,vi\r\n";
  out << std::setprecision(9);
  for (const auto& v : store.videos) {
    grad::Tape<float> tape;
    const auto fwd = model.forward(tape, v.features, select_queries(v, queries));
    std::string id = v.id;
    if (id.find_first_of(",\"\r\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : id) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      id = quoted + "\"";
    }
    for (std::size_t t = 0; t < v.n_frames(); ++t) {
      out << id << ',' << t;
      double mean = 0.0;
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double x = fwd.channels[c].value()[t];
        mean += x;
        out << ',' << x;
      }
      out << ',' << mean / static_cast<double>(kChannels) << ',' << static_cast<double>(fwd.fused.value()[t]) << "\r\n";
    }
  }
}

}  // namespace spivg::pipeline
