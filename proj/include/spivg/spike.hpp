#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spivg/error.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/ops.hpp"

// Spiking keyframe extraction: the consecutive-frame feature distance sequence
// is integrated by a stack of spiking neurons; the top layer's spikes mark
// keyframes.

namespace spivg::spike {

enum class NeuronKind { kLIF, kIF, kQIF, kEIF };

inline std::string_view to_string(NeuronKind kind) {
  switch (kind) {
    case NeuronKind::kLIF: return "LIF";
    case NeuronKind::kIF: return "IF";
    case NeuronKind::kQIF: return "QIF";
    case NeuronKind::kEIF: return "EIF";
  }
  return "LIF";
}

inline NeuronKind parse_neuron_kind(std::string_view name) {
  if (name == "LIF") return NeuronKind::kLIF;
  if (name == "IF") return NeuronKind::kIF;
  if (name == "QIF") return NeuronKind::kQIF;
  if (name == "EIF") return NeuronKind::kEIF;
  throw Error(ErrorCode::kConfig, "unknown neuron kind '" + std::string(name) + "'");
}

struct NeuronConfig {
  NeuronKind kind = NeuronKind::kLIF;
  double c_m = 1.0;          // membrane capacitance
  double g_l = 0.2;          // leak admittance
  double e_l = 0.0;          // resting potential
  double threshold = 1.0;    // spike threshold
  double v_reset = 0.0;
  int refractory_steps = 1;
  double qif_a = 1.0;        // QIF curvature
  double qif_v_c = 0.5;      // QIF critical voltage
  double eif_delta_t = 0.2;  // EIF slope factor
  double eif_v_t = 0.8;      // EIF rheobase
  double surrogate_width = 0.5;

  void validate() const {
    if (!(c_m > 0.0)) throw Error(ErrorCode::kConfig, "neuron: c_m must be > 0");
    if (!(g_l >= 0.0)) throw Error(ErrorCode::kConfig, "neuron: g_l must be >= 0");
    if (refractory_steps < 0) throw Error(ErrorCode::kConfig, "neuron: refractory_steps must be >= 0");
    if (!(threshold > v_reset)) throw Error(ErrorCode::kConfig, "neuron: threshold must exceed v_reset");
    if (!(surrogate_width > 0.0)) throw Error(ErrorCode::kConfig, "neuron: surrogate_width must be > 0");
    if (kind == NeuronKind::kEIF && !(eif_delta_t > 0.0)) {
      throw Error(ErrorCode::kConfig, "neuron: eif_delta_t must be > 0");
    }
  }
};

/// Voltage drift of the neuron model and its partial derivatives.
struct Drift {
  double value = 0.0;
  double d_v = 0.0;
  double d_g_l = 0.0;
  double d_e_l = 0.0;
};

inline Drift drift(const NeuronConfig& cfg, double v) {
  switch (cfg.kind) {
    case NeuronKind::kLIF:
      return {-cfg.g_l * (v - cfg.e_l), -cfg.g_l, -(v - cfg.e_l), cfg.g_l};
    case NeuronKind::kIF:
      return {};
    case NeuronKind::kQIF:
      return {cfg.qif_a * (v - cfg.e_l) * (v - cfg.qif_v_c),
              cfg.qif_a * (2.0 * v - cfg.e_l - cfg.qif_v_c), 0.0, -cfg.qif_a * (v - cfg.qif_v_c)};
    case NeuronKind::kEIF: {
      const double e = std::exp((v - cfg.eif_v_t) / cfg.eif_delta_t);
      return {-cfg.g_l * (v - cfg.e_l) + cfg.g_l * cfg.eif_delta_t * e, -cfg.g_l + cfg.g_l * e,
              -(v - cfg.e_l) + cfg.eif_delta_t * e, cfg.g_l};
    }
  }
  return {};
}

struct StepResult {
  double v = 0.0;       // membrane potential at this step (before any reset)
  bool spike = false;
  int refractory = 0;   // refractory steps remaining after this step
  double next = 0.0;    // potential carried into the next step
};

/// One unit-time update: C_m (v_t - v_{t-1}) = drift(v_{t-1}) + z_t. While the
/// refractory counter is positive the potential is held at V_reset.
inline StepResult neuron_step(const NeuronConfig& cfg, double v_prev, double z, int refractory) {
  if (refractory > 0) return {cfg.v_reset, false, refractory - 1, cfg.v_reset};
  const double v = v_prev + (drift(cfg, v_prev).value + z) / cfg.c_m;
  if (v >= cfg.threshold) return {v, true, cfg.refractory_steps, cfg.v_reset};
  return {v, false, 0, v};
}

/// Backward substitute for d(spike)/dv: a rectangular window of half-width w.
inline double surrogate_spike_grad(double v, double threshold, double width = 0.5) {
  return std::abs(v - threshold) < width ? 1.0 / (2.0 * width) : 0.0;
}

/// The forward function whose derivative is surrogate_spike_grad.
inline double relaxed_spike(double v, double threshold, double width = 0.5) {
  return std::clamp((v - threshold + width) / (2.0 * width), 0.0, 1.0);
}

struct MembraneTrace {
  std::vector<double> v;
  std::vector<std::uint8_t> spikes;
  std::vector<int> refractory;  // counter on entry to each step
};

/// Per-layer neuron parameters plus the gain applied to the layer's input.
struct LayerParams {
  NeuronConfig neuron;
  double gain = 1.0;
};

struct SpikeResult {
  /// Top-layer spikes as 0/1, or the raw input when the stack is empty.
  std::vector<double> output;
  std::vector<MembraneTrace> layers;
};

/// Simulates one layer on an input sequence starting from V_reset.
inline MembraneTrace run_layer(const LayerParams& layer, std::span<const double> input) {
  MembraneTrace trace;
  trace.v.reserve(input.size());
  trace.spikes.reserve(input.size());
  trace.refractory.reserve(input.size());
  double carry = layer.neuron.v_reset;
  int refractory = 0;
  for (double x : input) {
    trace.refractory.push_back(refractory);
    const StepResult step = neuron_step(layer.neuron, carry, layer.gain * x, refractory);
    trace.v.push_back(step.v);
    trace.spikes.push_back(step.spike ? 1 : 0);
    refractory = step.refractory;
    carry = step.next;
  }
  return trace;
}

inline SpikeResult snn_forward(std::span<const LayerParams> layers, std::span<const double> delta) {
  SpikeResult result;
  result.output.assign(delta.begin(), delta.end());
  for (const auto& layer : layers) {
    result.layers.push_back(run_layer(layer, result.output));
    const auto& spikes = result.layers.back().spikes;
    result.output.assign(spikes.begin(), spikes.end());
  }
  return result;
}

/// n identical layers with unit gain.
inline SpikeResult snn_forward(const NeuronConfig& cfg, int n_layers,
                               std::span<const double> delta) {
  if (n_layers < 0) throw Error(ErrorCode::kInvalidArgument, "snn_forward: n_layers must be >= 0");
  std::vector<LayerParams> layers(static_cast<std::size_t>(n_layers), LayerParams{cfg, 1.0});
  return snn_forward(std::span<const LayerParams>(layers), delta);
}

/// Euclidean distance between consecutive rows of a T x d matrix.
template <typename T>
std::vector<double> frame_diff(const grad::Tensor<T>& x) {
  if (x.rank() != 2) throw Error(ErrorCode::kShapeMismatch, "frame_diff: expected a T x d matrix");
  if (x.rows() < 2) throw Error(ErrorCode::kSequenceTooShort, "frame_diff: sequence too short");
  std::vector<double> out(x.rows() - 1);
  for (std::size_t t = 0; t + 1 < x.rows(); ++t) {
    double s = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = static_cast<double>(x.at(t + 1, c)) - x.at(t, c);
      s += d * d;
    }
    out[t] = std::sqrt(s);
  }
  return out;
}

inline constexpr double kStandardizeEps = 1e-12;

/// Z-score over the whole sequence; a constant sequence maps to zeros.
inline std::vector<double> standardize(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= n;
  const double sd = std::sqrt(var + kStandardizeEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mu) / sd;
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable versions.

/// Z-score as a tape op.
template <typename T>
grad::Var<T> zscore(const grad::Var<T>& x) {
  const auto& xv = x.value();
  std::vector<double> in(xv.data().begin(), xv.data().end());
  const auto n = static_cast<double>(in.size());
  double mu = 0.0;
  for (double v : in) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : in) var += (v - mu) * (v - mu);
  var /= n;
  const double sd = std::sqrt(var + kStandardizeEps);
  grad::Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = static_cast<T>((in[i] - mu) / sd);
  const std::size_t ix = x.id();
  return x.tape().record("zscore", std::move(out), {x}, [ix, sd](grad::Tape<T>& t, std::size_t self) {
    const auto& g = t.node(self).grad;
    const auto& y = t.node(self).value;
    const auto n = static_cast<double>(g.size());
    double g_mean = 0.0;
    double gy_mean = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      g_mean += g[i];
      gy_mean += static_cast<double>(g[i]) * y[i];
    }
    g_mean /= n;
    gy_mean /= n;
    auto gx = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gx[i] += static_cast<T>((g[i] - g_mean - y[i] * gy_mean) / sd);
    }
  });
}

/// Consecutive-row distances as a tape op (sub of shifted slices, row norms).
template <typename T>
grad::Var<T> frame_diff(const grad::Var<T>& x) {
  if (x.value().rank() != 2) throw Error(ErrorCode::kShapeMismatch, "frame_diff: expected a T x d matrix");
  const std::size_t n = x.value().rows();
  if (n < 2) throw Error(ErrorCode::kSequenceTooShort, "frame_diff: sequence too short");
  return grad::l2_norm_rows(grad::sub(grad::slice_rows(x, 1, n), grad::slice_rows(x, 0, n - 1)));
}

enum class SpikeOutput {
  kHard,     // 0/1 spikes
  kRelaxed,  // relaxed_spike(v): the surrogate's antiderivative
};

/// One spiking layer on the tape. Trainable scalars (shape [1]): capacitance,
/// leak, resting potential and input gain. Reset and refractory decisions come
/// from hard threshold crossings and are constant under differentiation; the
/// threshold itself is differentiated through surrogate_spike_grad.
template <typename T>
grad::Var<T> snn_layer(const grad::Var<T>& input, const grad::Var<T>& c_m, const grad::Var<T>& g_l,
                       const grad::Var<T>& e_l, const grad::Var<T>& gain, const NeuronConfig& base,
                       SpikeOutput mode) {
  const auto& in = input.value();
  if (in.rank() != 1) throw Error(ErrorCode::kShapeMismatch, "snn_layer: expected a sequence input");
  NeuronConfig cfg = base;
  cfg.c_m = c_m.value()[0];
  cfg.g_l = g_l.value()[0];
  cfg.e_l = e_l.value()[0];
  const double k = gain.value()[0];
  const std::size_t n = in.size();

  std::vector<double> u_prev(n), v(n);
  std::vector<std::uint8_t> active(n), fired(n);
  grad::Tensor<T> out({n});
  double carry = cfg.v_reset;
  int refractory = 0;
  for (std::size_t t = 0; t < n; ++t) {
    u_prev[t] = carry;
    if (refractory > 0) {
      --refractory;
      v[t] = cfg.v_reset;
      carry = cfg.v_reset;
      continue;
    }
    active[t] = 1;
    v[t] = carry + (drift(cfg, carry).value + k * static_cast<double>(in[t])) / cfg.c_m;
    fired[t] = v[t] >= cfg.threshold ? 1 : 0;
    out[t] = static_cast<T>(mode == SpikeOutput::kHard
                                ? static_cast<double>(fired[t])
                                : relaxed_spike(v[t], cfg.threshold, cfg.surrogate_width));
    if (fired[t]) {
      carry = cfg.v_reset;
      refractory = cfg.refractory_steps;
    } else {
      carry = v[t];
    }
  }

  const std::size_t ids[5] = {input.id(), c_m.id(), g_l.id(), e_l.id(), gain.id()};
  return input.tape().record(
      "snn_layer", std::move(out), {input, c_m, g_l, e_l, gain},
      [=, u_prev = std::move(u_prev), v = std::move(v), active = std::move(active),
       fired = std::move(fired)](grad::Tape<T>& t, std::size_t self) {
        const auto& g = t.node(self).grad;
        const auto& x = t.value(ids[0]);
        std::vector<double> g_in(n, 0.0);
        double g_cm = 0.0, g_gl = 0.0, g_el = 0.0, g_gain = 0.0;
        double g_carry = 0.0;  // dL/d(carry out of step t)
        for (std::size_t s = n; s-- > 0;) {
          if (!active[s]) {
            g_carry = 0.0;
            continue;
          }
          double gv = g[s] * surrogate_spike_grad(v[s], cfg.threshold, cfg.surrogate_width);
          if (!fired[s]) gv += g_carry;
          const Drift dr = drift(cfg, u_prev[s]);
          const double z = k * static_cast<double>(x[s]);
          g_in[s] += gv * k / cfg.c_m;
          g_gain += gv * static_cast<double>(x[s]) / cfg.c_m;
          g_cm -= gv * (dr.value + z) / (cfg.c_m * cfg.c_m);
          g_gl += gv * dr.d_g_l / cfg.c_m;
          g_el += gv * dr.d_e_l / cfg.c_m;
          g_carry = gv * (1.0 + dr.d_v / cfg.c_m);
        }
        if (t.needs_grad(ids[0])) {
          auto gi = t.grad_buffer(ids[0]);
          for (std::size_t s = 0; s < n; ++s) gi[s] += static_cast<T>(g_in[s]);
        }
        const double scalars[4] = {g_cm, g_gl, g_el, g_gain};
        for (int q = 0; q < 4; ++q) {
          if (t.needs_grad(ids[q + 1])) t.grad_buffer(ids[q + 1])[0] += static_cast<T>(scalars[q]);
        }
      });
}

/// Trainable stack of spiking layers. Threshold, reset and refractory length
/// stay fixed; capacitance, leak, resting potential and gain are learned.
template <typename T>
struct SpikeStack {
  NeuronConfig base;
  struct Layer {
    grad::Tensor<T> c_m, g_l, e_l, gain;
  };
  std::vector<Layer> layers;

  SpikeStack() = default;
  SpikeStack(const NeuronConfig& cfg, int n_layers) : base(cfg) {
    cfg.validate();
    if (n_layers < 0) throw Error(ErrorCode::kConfig, "snn_layers must be >= 0");
    for (int i = 0; i < n_layers; ++i) {
      layers.push_back({grad::make_param<T>({1}, static_cast<T>(cfg.c_m)),
                        grad::make_param<T>({1}, static_cast<T>(cfg.g_l)),
                        grad::make_param<T>({1}, static_cast<T>(cfg.e_l)),
                        grad::make_param<T>({1}, T{1})});
    }
  }

  /// `delta` has length T-1; the empty stack returns it unchanged.
  grad::Var<T> forward(const grad::Var<T>& delta, SpikeOutput mode) {
    grad::Var<T> h = delta;
    for (auto& layer : layers) {
      auto& tape = delta.tape();
      h = snn_layer(h, tape.parameter(layer.c_m), tape.parameter(layer.g_l), tape.parameter(layer.e_l),
                    tape.parameter(layer.gain), base, mode);
    }
    return h;
  }

  std::vector<LayerParams> layer_params() const {
    std::vector<LayerParams> out;
    for (const auto& layer : layers) {
      LayerParams p{base, static_cast<double>(layer.gain[0])};
      p.neuron.c_m = layer.c_m[0];
      p.neuron.g_l = layer.g_l[0];
      p.neuron.e_l = layer.e_l[0];
      out.push_back(p);
    }
    return out;
  }

  /// Restores C_m > 0 and G_L >= 0 after an optimizer step.
  void project() {
    for (auto& layer : layers) {
      layer.c_m[0] = std::max(layer.c_m[0], static_cast<T>(1e-3));
      layer.g_l[0] = std::max(layer.g_l[0], T{0});
    }
  }

  void collect(const std::string& prefix, grad::ParamList<T>& out) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string p = prefix + ".layer" + std::to_string(i);
      out.emplace_back(p + ".c_m", &layers[i].c_m);
      out.emplace_back(p + ".g_l", &layers[i].g_l);
      out.emplace_back(p + ".e_l", &layers[i].e_l);
      out.emplace_back(p + ".gain", &layers[i].gain);
    }
  }
};

}  // namespace spivg::spike
