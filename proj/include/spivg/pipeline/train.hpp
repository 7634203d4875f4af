#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/adamw.hpp"
#include "spivg/gradtape/loss.hpp"
#include "spivg/pipeline/checkpoint.hpp"
#include "spivg/pipeline/config.hpp"
#include "spivg/pipeline/feature_store.hpp"
#include "spivg/pipeline/model.hpp"

namespace spivg::pipeline {

/// Fold of every video (by store position): a seeded shuffle dealt round-robin.
inline std::vector<int> assign_folds(std::size_t n_videos, int n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw Error(ErrorCode::kInvalidArgument, "folds: need at least 2 folds");
  std::vector<std::size_t> order(n_videos);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xF01D));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<int> fold(n_videos);
  for (std::size_t p = 0; p < n_videos; ++p) fold[order[p]] = static_cast<int>(p % static_cast<std::size_t>(n_folds));
  return fold;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline Split split_for(const FeatureStore& store, int n_folds, int fold, std::uint64_t seed) {
  if (fold < 0 || fold >= n_folds) {
    throw Error(ErrorCode::kInvalidArgument, "fold " + std::to_string(fold) + " outside [0, " +
                                                 std::to_string(n_folds) + ")");
  }
  const auto folds = assign_folds(store.videos.size(), n_folds, seed);
  Split s;
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == fold ? s.test : s.train).push_back(i);
  return s;
}

/// Per-frame mean of the annotators' binary summaries.
inline grad::Tensor<float> training_target(const VideoRecord& v) {
  const auto& users = v.annotations.user_summaries;
  if (users.empty()) throw Error(ErrorCode::kInvalidArgument, "video '" + v.id + "' has no user summaries to train on");
  grad::Tensor<float> y({v.n_frames()});
  for (std::size_t t = 0; t < v.n_frames(); ++t) {
    double s = 0.0;
    for (const auto& u : users) s += u[t];
    y[t] = static_cast<float>(s / static_cast<double>(users.size()));
  }
  return y;
}

inline std::vector<std::vector<float>> all_queries(const VideoRecord& v) {
  std::vector<std::vector<float>> out;
  for (const auto& q : v.queries) out.push_back(q.vector);
  return out;
}

struct TrainOptions {
  int n_folds = 5;
  int fold = 0;
  /// Called after every epoch with (epoch, mean loss).
  std::function<void(int, double)> on_epoch;
};

/// Fixed-epoch training on every video outside the held-out fold.
inline Checkpoint train(const PipelineConfig& cfg, const FeatureStore& store, const TrainOptions& opts) {
  cfg.validate();
  const Split split = split_for(store, opts.n_folds, opts.fold, cfg.optimizer.seed);
  if (split.train.empty()) throw Error(ErrorCode::kInvalidArgument, "train: no training videos outside the test fold");

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.model = std::make_shared<Model<float>>(cfg, store.dim(), store.text_dim());
  ckpt.meta = {store.dataset, resolved_epochs(cfg, store.dataset), opts.fold, opts.n_folds, cfg.optimizer.seed, {}};
  Model<float>& model = *ckpt.model;

  grad::AdamW<float> optimizer({cfg.optimizer.lr, cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps,
                                cfg.optimizer.weight_decay});
  const auto params = model.trainable();
  std::vector<grad::Tensor<float>> targets;
  for (std::size_t i : split.train) targets.push_back(training_target(store.videos[i]));

  auto step = [&](std::size_t accumulated) {
    const auto scale = static_cast<float>(1.0 / static_cast<double>(accumulated));
    for (auto* p : params) {
      for (auto& g : p->grad()) g *= scale;
    }
    optimizer.step(params);
    model.project();
    for (auto* p : params) p->zero_grad();
  };

  std::vector<std::size_t> order(split.train.size());
  for (int epoch = 1; epoch <= ckpt.meta.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.optimizer.seed, 0xE90C, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    std::size_t accumulated = 0;
    for (std::size_t k : order) {
      const VideoRecord& video = store.videos[split.train[k]];
      grad::Tape<float> tape;
      Rng dropout_rng(mix_seed(cfg.optimizer.seed, static_cast<std::uint64_t>(epoch), split.train[k]));
      auto out = model.forward(tape, video.features, all_queries(video), &dropout_rng);
      auto loss = grad::bce_loss(out.fused, targets[k]);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw Error(ErrorCode::kDivergence, "training diverged at epoch " + std::to_string(epoch) + " on video '" +
                                                video.id + "' (loss " + std::to_string(value) + ")");
      }
      tape.backward(loss);
      epoch_loss += value;
      if (++accumulated == static_cast<std::size_t>(cfg.optimizer.batch_videos)) {
        step(accumulated);
        accumulated = 0;
      }
    }
    if (accumulated > 0) step(accumulated);
    const double mean_loss = epoch_loss / static_cast<double>(order.size());
    ckpt.meta.loss_history.push_back(mean_loss);
    if (opts.on_epoch) opts.on_epoch(epoch, mean_loss);
  }
  return ckpt;
}

}  // namespace spivg::pipeline
