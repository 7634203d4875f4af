#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/ops.hpp"
#include "spivg/random.hpp"

// Graph reasoning over frames: three temporal graphs, each driving its own
// stack of similarity-filtered mean-aggregation layers and a sigmoid readout.

namespace spivg::reasoner {

enum class GraphKind { kForward, kBackward, kUndirected };

inline std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::kForward: return "forward";
    case GraphKind::kBackward: return "backward";
    case GraphKind::kUndirected: return "undirected";
  }
  return "forward";
}

using NeighborLists = std::vector<std::vector<std::size_t>>;

/// Node i aggregates from N_i. Forward graphs look at past frames, backward
/// graphs at future frames.
struct FrameGraph {
  std::size_t n_nodes = 0;
  GraphKind kind = GraphKind::kForward;
  int window = 1;
  NeighborLists neighbors;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& nb : neighbors) n += nb.size();
    return kind == GraphKind::kUndirected ? n / 2 : n;
  }
};

inline FrameGraph build_graph(std::size_t n_nodes, int window, GraphKind kind) {
  if (window < 1) throw Error(ErrorCode::kInvalidArgument, "build_graph: window must be >= 1");
  if (n_nodes < 1) throw Error(ErrorCode::kInvalidArgument, "build_graph: need at least one node");
  FrameGraph g{n_nodes, kind, window, NeighborLists(n_nodes)};
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    auto& nb = g.neighbors[i];
    if (kind != GraphKind::kBackward) {
      for (std::size_t j = i > w ? i - w : 0; j < i; ++j) nb.push_back(j);
    }
    if (kind != GraphKind::kForward) {
      for (std::size_t j = i + 1; j < n_nodes && j <= i + w; ++j) nb.push_back(j);
    }
  }
  return g;
}

inline std::array<FrameGraph, 3> build_graphs(std::size_t n_nodes, int window) {
  return {build_graph(n_nodes, window, GraphKind::kForward),
          build_graph(n_nodes, window, GraphKind::kBackward),
          build_graph(n_nodes, window, GraphKind::kUndirected)};
}

/// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

/// Keeps j in N_i when |cos(f(h_i), f(h_j))| > tau. `projected[j]` is f(h_j).
inline std::vector<std::size_t> filter_neighbors(const std::vector<std::vector<double>>& projected,
                                                 std::size_t i, std::span<const std::size_t> nbrs,
                                                 double tau) {
  std::vector<std::size_t> kept;
  for (std::size_t j : nbrs) {
    if (std::abs(cosine(projected[i], projected[j])) > tau) kept.push_back(j);
  }
  return kept;
}

struct ReasonerConfig {
  int window = 10;
  double tau_cos = 0.5;
  int layers = 2;
  std::size_t hidden_dim = 64;

  void validate() const {
    if (window < 1) throw Error(ErrorCode::kConfig, "reasoner: window must be >= 1");
    if (!(tau_cos > 0.0 && tau_cos < 1.0)) throw Error(ErrorCode::kConfig, "reasoner: tau_cos must be in (0, 1)");
    if (layers < 0) throw Error(ErrorCode::kConfig, "reasoner: layers must be >= 0");
    if (hidden_dim < 1) throw Error(ErrorCode::kConfig, "reasoner: hidden_dim must be >= 1");
  }
};

/// Dropout applied inside the reasoner (FFN input and readout input).
struct DropoutSpec {
  double keep_prob = 1.0;
  Rng* rng = nullptr;

  template <typename T>
  grad::Var<T> operator()(const grad::Var<T>& x) const {
    if (rng == nullptr || keep_prob == 1.0) return x;
    return grad::dropout(x, keep_prob, *rng);
  }
};

/// h_i <- h_i + phi(mean_{j in filtered N_i} h_j); phi = Linear, GELU, Linear.
/// The projection f only decides neighbor membership, which is held constant
/// under differentiation, so f never receives gradient.
template <typename T>
struct AggregationLayer {
  grad::Linear<T> proj;
  grad::Linear<T> ffn_in;
  grad::Linear<T> ffn_out;
  double tau_cos = 0.5;

  AggregationLayer() = default;
  AggregationLayer(std::size_t dim, std::size_t hidden, double tau, Rng& rng)
      : proj(dim, dim, rng), ffn_in(dim, hidden, rng), ffn_out(hidden, dim, rng, 0.5), tau_cos(tau) {
    proj.weight.set_requires_grad(false);
    proj.bias.set_requires_grad(false);
  }

  std::size_t dim() const { return proj.in_features(); }

  /// Filtered neighbor lists for current node states.
  NeighborLists filtered(const grad::Tensor<T>& h, const FrameGraph& graph) const {
    if (h.rank() != 2 || h.rows() != graph.n_nodes || h.cols() != dim()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "aggregate_layer: states " + grad::shape_str(h.shape()) + " vs graph of " +
                      std::to_string(graph.n_nodes) + " nodes and dim " + std::to_string(dim()));
    }
    std::vector<std::vector<double>> projected(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) projected[i] = proj.apply(h.row(i));
    NeighborLists out(h.rows());
    for (std::size_t i = 0; i < h.rows(); ++i) {
      out[i] = filter_neighbors(projected, i, graph.neighbors[i], tau_cos);
    }
    return out;
  }

  grad::Var<T> phi(const grad::Var<T>& x) { return ffn_out(grad::gelu(ffn_in(x))); }

  grad::Var<T> operator()(const grad::Var<T>& h, const FrameGraph& graph, const DropoutSpec& drop = {}) {
    const NeighborLists kept = filtered(h.value(), graph);
    grad::Tensor<T> mask(h.shape());
    bool any = false;
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (kept[i].empty()) continue;
      any = true;
      for (auto& v : mask.row(i)) v = T{1};
    }
    if (!any) return h;
    auto message = phi(drop(grad::neighbor_mean(h, kept)));
    return grad::add(h, grad::hadamard(message, h.tape().constant(std::move(mask))));
  }

  void collect(const std::string& prefix, grad::ParamList<T>& out) {
    proj.collect(prefix + ".proj", out);
    ffn_in.collect(prefix + ".ffn_in", out);
    ffn_out.collect(prefix + ".ffn_out", out);
  }
};

/// Layers followed by a per-frame sigmoid readout; produces a [T] score sequence.
template <typename T>
struct ReasonerChannel {
  std::vector<AggregationLayer<T>> layers;
  grad::Linear<T> readout;

  ReasonerChannel() = default;
  ReasonerChannel(std::size_t dim, const ReasonerConfig& cfg, Rng& rng) : readout(dim, 1, rng) {
    cfg.validate();
    for (int l = 0; l < cfg.layers; ++l) layers.emplace_back(dim, cfg.hidden_dim, cfg.tau_cos, rng);
  }

  std::size_t dim() const { return readout.in_features(); }

  grad::Var<T> operator()(const grad::Var<T>& x, const FrameGraph& graph, const DropoutSpec& drop = {}) {
    const auto& xv = x.value();
    if (xv.rank() != 2 || xv.cols() != dim() || xv.rows() != graph.n_nodes) {
      throw Error(ErrorCode::kShapeMismatch, "channel_forward: input " + grad::shape_str(xv.shape()) +
                                                 ", expected [" + std::to_string(graph.n_nodes) +
                                                 ", " + std::to_string(dim()) + "]");
    }
    grad::Var<T> h = x;
    for (auto& layer : layers) h = layer(h, graph, drop);
    auto scores = grad::sigmoid(readout(drop(h)));
    return grad::reshape(scores, {graph.n_nodes});
  }

  void collect(const std::string& prefix, grad::ParamList<T>& out) {
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l].collect(prefix + ".layer" + std::to_string(l), out);
    readout.collect(prefix + ".readout", out);
  }
};

}  // namespace spivg::reasoner
