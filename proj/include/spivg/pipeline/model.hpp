#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/fusion.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/ops.hpp"
#include "spivg/pipeline/config.hpp"
#include "spivg/random.hpp"
#include "spivg/reasoner.hpp"
#include "spivg/spike.hpp"
#include "spivg/textfuse.hpp"

namespace spivg::pipeline {

inline constexpr std::size_t kChannels = 4;  // spikes + one per graph

/// splitmix64 over a few words; derives reproducible per-purpose seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t z = a;
  for (std::uint64_t w : {b, c}) {
    z += 0x9E3779B97F4A7C15ULL + w;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
  }
  return z;
}

/// The full network: optional text gate, spiking extractor, three reasoner
/// channels and the fusion head.
template <typename T>
class Model {
 public:
  struct Output {
    grad::Var<T> fused;                          // [T]
    std::array<grad::Var<T>, kChannels> channels;  // each [T]
  };

  Model(const PipelineConfig& cfg, std::size_t feature_dim, std::size_t text_dim)
      : config_(cfg), feature_dim_(feature_dim), text_dim_(text_dim) {
    cfg.validate();
    if (feature_dim == 0) throw Error(ErrorCode::kInvalidArgument, "model: feature dim must be >= 1");
    Rng rng(mix_seed(cfg.optimizer.seed, 0x1417));
    if (text_dim > 0) gate_ = textfuse::FusionGate<T>(text_dim, feature_dim, cfg.text.gate_dim, rng);
    snn_ = spike::SpikeStack<T>(cfg.neuron, cfg.snn_layers);
    for (auto& ch : channels_) ch = reasoner::ReasonerChannel<T>(feature_dim, cfg.reasoner, rng);
    fusion_ = fusion::FusionModule<T>(cfg.fusion, kChannels);
  }

  const PipelineConfig& config() const { return config_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t text_dim() const { return text_dim_; }

  /// Every tensor of the model in a fixed order, frozen ones included.
  grad::ParamList<T> parameters() {
    grad::ParamList<T> out;
    if (gate_) gate_->collect("text", out);
    snn_.collect("spike", out);
    for (std::size_t i = 0; i < channels_.size(); ++i) channels_[i].collect("reasoner.ch" + std::to_string(i + 1), out);
    fusion_.collect("fusion", out);
    return out;
  }

  std::vector<grad::Tensor<T>*> trainable() {
    std::vector<grad::Tensor<T>*> out;
    for (const auto& [name, t] : parameters()) {
      if (t->requires_grad()) out.push_back(t);
    }
    return out;
  }

  /// Keeps neuron parameters in their valid range after an update.
  void project() { snn_.project(); }

  /// One video. `dropout_rng` enables training mode: dropout in the reasoner
  /// and surrogate-relaxed spikes in channel 0.
  Output forward(grad::Tape<T>& tape, const grad::Tensor<T>& features, const std::vector<std::vector<T>>& queries,
                 Rng* dropout_rng = nullptr) {
    if (features.rank() != 2 || features.cols() != feature_dim_) {
      throw Error(ErrorCode::kShapeMismatch, "model: features " + grad::shape_str(features.shape()) +
                                                 ", model expects dim " + std::to_string(feature_dim_));
    }
    const std::size_t n = features.rows();
    if (n < 2) throw Error(ErrorCode::kSequenceTooShort, "model: sequence too short");
    const bool training = dropout_rng != nullptr;
    auto x = tape.constant(features);
    if (!queries.empty()) {
      if (!gate_) throw Error(ErrorCode::kShapeMismatch, "model: query given but the model has no text gate");
      x = textfuse::fuse_sequence(*gate_, queries, x);
    }

    auto delta = spike::frame_diff(x);
    if (config_.standardize_diff) delta = spike::zscore(delta);
    auto spikes = snn_.forward(delta, training ? spike::SpikeOutput::kRelaxed : spike::SpikeOutput::kHard);

    Output out;
    out.channels[0] = grad::concat<T>({tape.constant(grad::Tensor<T>({1})), spikes});
    const auto graphs = reasoner::build_graphs(n, config_.reasoner.window);
    const reasoner::DropoutSpec drop{training ? 1.0 - config_.optimizer.dropout : 1.0, dropout_rng};
    for (std::size_t g = 0; g < graphs.size(); ++g) out.channels[g + 1] = channels_[g](x, graphs[g], drop);
    out.fused = fusion_(std::vector<grad::Var<T>>(out.channels.begin(), out.channels.end()));
    return out;
  }

 private:
  PipelineConfig config_;
  std::size_t feature_dim_ = 0;
  std::size_t text_dim_ = 0;
  std::optional<textfuse::FusionGate<T>> gate_;
  spike::SpikeStack<T> snn_;
  std::array<reasoner::ReasonerChannel<T>, 3> channels_;
  fusion::FusionModule<T> fusion_;
};

}  // namespace spivg::pipeline
