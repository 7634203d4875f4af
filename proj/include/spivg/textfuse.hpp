#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/ops.hpp"
#include "spivg/random.hpp"

// Query conditioning. Text nodes connect to every video node and nothing else;
// each frame absorbs a scalar-gated projection of the text vector.

namespace spivg::textfuse {

/// Bipartite text-to-video graph. Edge (q, i) joins text node q to frame i.
struct HeteroGraph {
  std::size_t n_video = 0;
  std::size_t n_text = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
};

inline HeteroGraph build_hetero_graph(std::size_t n_frames, std::size_t n_queries) {
  if (n_frames < 1) throw Error(ErrorCode::kInvalidArgument, "build_hetero_graph: need at least one frame");
  HeteroGraph g{n_frames, n_queries, {}};
  g.edges.reserve(n_frames * n_queries);
  for (std::size_t q = 0; q < n_queries; ++q) {
    for (std::size_t i = 0; i < n_frames; ++i) g.edges.emplace_back(q, i);
  }
  return g;
}

/// x = v + sigmoid((v_t W1) . (v W2)) * (v_t W3 + b). Maps are stored
/// input-major: W1 [d_t x d_g], W2 [d_v x d_g], W3 [d_t x d_v], b [d_v].
template <typename T>
struct FusionGate {
  grad::Tensor<T> w1, w2, w3, b;

  FusionGate() = default;
  FusionGate(std::size_t text_dim, std::size_t video_dim, std::size_t gate_dim, Rng& rng)
      : w1(grad::make_param_normal<T>({text_dim, gate_dim}, text_dim, 1.0, rng)),
        w2(grad::make_param_normal<T>({video_dim, gate_dim}, video_dim, 1.0, rng)),
        w3(grad::make_param_normal<T>({text_dim, video_dim}, text_dim, 1.0, rng)),
        b(grad::make_param<T>({video_dim})) {}

  std::size_t text_dim() const { return w1.rows(); }
  std::size_t video_dim() const { return w2.rows(); }
  std::size_t gate_dim() const { return w1.cols(); }

  void check_dims(std::size_t text, std::size_t video) const {
    if (text != text_dim() || video != video_dim()) {
      throw Error(ErrorCode::kShapeMismatch, "gated_fuse: text/video dims " + std::to_string(text) + "/" +
                                                 std::to_string(video) + ", gate expects " +
                                                 std::to_string(text_dim()) + "/" + std::to_string(video_dim()));
    }
  }

  /// Plain-value evaluation for one frame.
  std::vector<double> gated_fuse(std::span<const double> text, std::span<const double> video) const {
    check_dims(text.size(), video.size());
    const std::size_t dg = gate_dim();
    const std::size_t dv = video_dim();
    double s = 0.0;
    for (std::size_t g = 0; g < dg; ++g) {
      double a = 0.0, c = 0.0;
      for (std::size_t k = 0; k < text.size(); ++k) a += text[k] * w1[k * dg + g];
      for (std::size_t k = 0; k < dv; ++k) c += video[k] * w2[k * dg + g];
      s += a * c;
    }
    const double gate = s >= 0.0 ? 1.0 / (1.0 + std::exp(-s)) : std::exp(s) / (1.0 + std::exp(s));
    std::vector<double> out(video.begin(), video.end());
    for (std::size_t j = 0; j < dv; ++j) {
      double m = b[j];
      for (std::size_t k = 0; k < text.size(); ++k) m += text[k] * w3[k * dv + j];
      out[j] += gate * m;
    }
    return out;
  }

  /// Gated fusion of every frame of x [T x d_v] with one query vector.
  grad::Var<T> operator()(const grad::Var<T>& x, std::span<const T> query) {
    const auto& xv = x.value();
    if (xv.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "fuse_sequence: expected a T x d matrix");
    check_dims(query.size(), xv.cols());
    auto& tape = x.tape();
    auto q = tape.constant(grad::Tensor<T>({1, query.size()}, std::vector<T>(query.begin(), query.end())));
    auto text_key = grad::reshape(grad::matmul(q, tape.parameter(w1)), {gate_dim(), 1});
    auto gate = grad::sigmoid(grad::matmul(grad::matmul(x, tape.parameter(w2)), text_key));
    auto message = grad::add(grad::matmul(q, tape.parameter(w3)), tape.parameter(b));
    return grad::add(x, grad::matmul(gate, message));
  }

  void collect(const std::string& prefix, grad::ParamList<T>& out) {
    out.emplace_back(prefix + ".w1", &w1);
    out.emplace_back(prefix + ".w2", &w2);
    out.emplace_back(prefix + ".w3", &w3);
    out.emplace_back(prefix + ".b", &b);
  }
};

/// Applies the gate once per query, in order. No queries leaves x untouched.
template <typename T>
grad::Var<T> fuse_sequence(FusionGate<T>& gate, const std::vector<std::vector<T>>& queries,
                           const grad::Var<T>& x) {
  grad::Var<T> out = x;
  for (const auto& q : queries) out = gate(out, q);
  return out;
}

}  // namespace spivg::textfuse
