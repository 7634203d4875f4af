#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/pipeline/feature_store.hpp"
#include "spivg/random.hpp"

// Planted-keyshot videos. Each video is a run of piecewise-constant shots with
// small frame noise. n_events shots are "key": they share a strong offset along
// a store-wide direction, so entering and leaving them produces the largest
// feature jumps.

namespace spivg::pipeline {

struct SynthConfig {
  std::size_t n_videos = 20;
  std::size_t n_frames = 240;
  std::size_t dim = 16;
  std::size_t n_events = 4;
  std::uint64_t seed = 7;
  std::size_t n_queries = 0;  // per video
  std::size_t text_dim = 8;

  double key_offset = 9.0;    // length of the shared key offset
  double key_spread = 1.0;    // per-key latent scale
  double background_spread = 1.0;
  double noise = 0.05;
  std::size_t min_shot = 4;
  std::size_t n_users = 3;
  double user_agreement = 0.9;
};

struct PlantedShot {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool key = false;
};

/// Ground truth kept alongside a generated video.
struct SynthVideo {
  VideoRecord record;
  std::vector<PlantedShot> shots;
};

inline std::size_t synth_key_length(const SynthConfig& cfg) {
  if (cfg.n_events == 0) return 0;
  const auto share = static_cast<std::size_t>(std::floor(0.15 * static_cast<double>(cfg.n_frames) /
                                                         static_cast<double>(cfg.n_events)));
  return std::max(cfg.min_shot, share);
}

namespace detail {

inline std::vector<double> unit_vector(std::size_t dim, Rng& rng) {
  std::vector<double> u(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (auto& v : u) {
      v = rng.normal();
      norm += v * v;
    }
  }
  norm = std::sqrt(norm);
  for (auto& v : u) v /= norm;
  return u;
}

/// Cuts `length` frames into background shots of [min_shot, max_shot] frames.
inline std::vector<std::size_t> cut_gap(std::size_t length, std::size_t min_shot, std::size_t max_shot, Rng& rng) {
  std::vector<std::size_t> out;
  while (length > max_shot) {
    const std::size_t hi = std::min(max_shot, length - min_shot);
    const auto len = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(min_shot),
                                                              static_cast<std::int64_t>(hi)));
    out.push_back(len);
    length -= len;
  }
  out.push_back(length);
  return out;
}

}  // namespace detail

inline std::vector<SynthVideo> make_synthetic_videos(const SynthConfig& cfg) {
  if (cfg.n_frames < 2 || cfg.dim < 1) throw Error(ErrorCode::kInvalidArgument, "synth: need T >= 2 and d >= 1");
  const std::size_t key_len = synth_key_length(cfg);
  const std::size_t n_gaps = cfg.n_events + 1;
  const std::size_t need = cfg.n_events * key_len + n_gaps * cfg.min_shot;
  if (need > cfg.n_frames) {
    throw Error(ErrorCode::kInvalidArgument,
                "synth: cannot pack " + std::to_string(cfg.n_events) + " events of " + std::to_string(key_len) +
                    " frames with background gaps into " + std::to_string(cfg.n_frames) + " frames");
  }
  const std::size_t max_bg = std::max(cfg.min_shot, key_len > 2 * cfg.min_shot ? 2 * key_len - cfg.min_shot
                                                                               : 2 * cfg.min_shot);
  Rng root(cfg.seed);
  const auto direction = detail::unit_vector(cfg.dim, root);
  std::vector<SynthVideo> out;
  for (std::size_t vi = 0; vi < cfg.n_videos; ++vi) {
    Rng rng = root.fork(vi);
    // Split the background frames into n_events + 1 gaps of at least min_shot.
    const std::size_t spare = cfg.n_frames - need;
    std::vector<double> weights(n_gaps);
    double total = 0.0;
    for (auto& w : weights) total += (w = rng.uniform(0.05, 1.0));
    std::vector<std::size_t> gaps(n_gaps, cfg.min_shot);
    std::size_t given = 0;
    for (std::size_t g = 0; g < n_gaps; ++g) {
      const auto extra = static_cast<std::size_t>(std::floor(static_cast<double>(spare) * weights[g] / total));
      gaps[g] += extra;
      given += extra;
    }
    gaps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n_gaps) - 1))] += spare - given;

    SynthVideo video;
    std::size_t t = 0;
    for (std::size_t g = 0; g < n_gaps; ++g) {
      for (std::size_t len : detail::cut_gap(gaps[g], cfg.min_shot, max_bg, rng)) {
        video.shots.push_back({t, t + len, false});
        t += len;
      }
      if (g < cfg.n_events) {
        video.shots.push_back({t, t + key_len, true});
        t += key_len;
      }
    }

    grad::Tensor<float> x({cfg.n_frames, cfg.dim});
    for (const auto& shot : video.shots) {
      std::vector<double> latent(cfg.dim);
      for (std::size_t c = 0; c < cfg.dim; ++c) {
        latent[c] = shot.key ? cfg.key_spread * rng.normal() + cfg.key_offset * direction[c]
                             : cfg.background_spread * rng.normal();
      }
      for (std::size_t f = shot.begin; f < shot.end; ++f) {
        for (std::size_t c = 0; c < cfg.dim; ++c) {
          x.at(f, c) = static_cast<float>(latent[c] + cfg.noise * rng.normal());
        }
      }
    }

    auto& rec = video.record;
    rec.id = "video_" + std::to_string(vi + 1);
    rec.features = std::move(x);
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
      metrics::Mask mask(cfg.n_frames, 0);
      for (const auto& shot : video.shots) {
        if (!shot.key || !rng.bernoulli(cfg.user_agreement)) continue;
        std::fill(mask.begin() + static_cast<std::ptrdiff_t>(shot.begin),
                  mask.begin() + static_cast<std::ptrdiff_t>(shot.end), std::uint8_t{1});
      }
      rec.annotations.user_summaries.push_back(std::move(mask));
    }
    // Key indicator smoothed with a [1/4, 1/2, 1/4] kernel, kept on key frames.
    std::vector<double> indicator(cfg.n_frames, 0.0);
    for (const auto& shot : video.shots) {
      if (shot.key) std::fill(indicator.begin() + static_cast<std::ptrdiff_t>(shot.begin),
                              indicator.begin() + static_cast<std::ptrdiff_t>(shot.end), 1.0);
    }
    std::vector<double> importance(cfg.n_frames, 0.0);
    for (std::size_t f = 0; f < cfg.n_frames; ++f) {
      if (indicator[f] == 0.0) continue;
      const double left = f > 0 ? indicator[f - 1] : indicator[f];
      const double right = f + 1 < cfg.n_frames ? indicator[f + 1] : indicator[f];
      importance[f] = 0.25 * left + 0.5 * indicator[f] + 0.25 * right;
    }
    rec.annotations.importance_scores.assign(cfg.n_users, importance);
    for (std::size_t q = 0; q < cfg.n_queries; ++q) {
      Query query{"query_" + std::to_string(q + 1), std::vector<float>(cfg.text_dim)};
      for (auto& v : query.vector) v = static_cast<float>(rng.normal());
      rec.queries.push_back(std::move(query));
    }
    out.push_back(std::move(video));
  }
  return out;
}

inline FeatureStore make_synthetic(const SynthConfig& cfg) {
  FeatureStore store;
  store.dataset = "synthetic";
  for (auto& v : make_synthetic_videos(cfg)) store.videos.push_back(std::move(v.record));
  return store;
}

}  // namespace spivg::pipeline
