#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "spivg/error.hpp"
#include "spivg/fusion.hpp"
#include "spivg/reasoner.hpp"
#include "spivg/spike.hpp"
#include "spivg/summarize.hpp"

namespace spivg::pipeline {

using nlohmann::json;

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double dropout = 0.4;            // drop probability
  std::optional<int> epochs;       // default depends on the dataset
  int batch_videos = 1;            // videos per optimizer step
  std::uint64_t seed = 0;
};

struct SplitConfig {
  int n_folds = 5;
  int fold_index = 0;
};

struct TextConfig {
  std::size_t gate_dim = 64;
};

struct PipelineConfig {
  spike::NeuronConfig neuron;
  int snn_layers = 2;
  bool standardize_diff = true;
  reasoner::ReasonerConfig reasoner;
  fusion::FusionConfig fusion;
  TextConfig text;
  summarize::SummaryConfig summary;
  OptimizerConfig optimizer;
  SplitConfig split;

  void validate() const;
};

/// Epoch budget per dataset name; unknown datasets get 30.
inline int default_epochs(std::string_view dataset) {
  std::string lower(dataset);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "tvsum") return 50;
  if (lower == "summe") return 40;
  if (lower == "videoxum") return 10;
  if (lower == "qfvs") return 20;
  return 30;
}

inline int resolved_epochs(const PipelineConfig& cfg, std::string_view dataset) {
  return cfg.optimizer.epochs ? *cfg.optimizer.epochs : default_epochs(dataset);
}

inline void PipelineConfig::validate() const {
  neuron.validate();
  if (snn_layers < 0) throw Error(ErrorCode::kConfig, "snn_layers must be >= 0");
  reasoner.validate();
  fusion.validate();
  if (text.gate_dim < 1) throw Error(ErrorCode::kConfig, "text.gate_dim must be >= 1");
  summary.validate();
  const auto& o = optimizer;
  if (!(o.lr >= 0.0)) throw Error(ErrorCode::kConfig, "optimizer.lr must be >= 0");
  if (!(o.beta1 >= 0.0 && o.beta1 < 1.0 && o.beta2 >= 0.0 && o.beta2 < 1.0)) {
    throw Error(ErrorCode::kConfig, "optimizer betas must be in [0, 1)");
  }
  if (!(o.eps > 0.0)) throw Error(ErrorCode::kConfig, "optimizer.eps must be > 0");
  if (!(o.weight_decay >= 0.0)) throw Error(ErrorCode::kConfig, "optimizer.weight_decay must be >= 0");
  if (!(o.dropout >= 0.0 && o.dropout < 1.0)) throw Error(ErrorCode::kConfig, "optimizer.dropout must be in [0, 1)");
  if (o.epochs && *o.epochs < 0) throw Error(ErrorCode::kConfig, "optimizer.epochs must be >= 0");
  if (o.batch_videos < 1) throw Error(ErrorCode::kConfig, "optimizer.batch_videos must be >= 1");
  if (split.n_folds < 2) throw Error(ErrorCode::kConfig, "split.n_folds must be >= 2");
  if (split.fold_index < 0 || split.fold_index >= split.n_folds) {
    throw Error(ErrorCode::kConfig, "split.fold_index must be in [0, n_folds)");
  }
}

namespace detail {

inline void reject_unknown(const json& obj, std::string_view block, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::kConfig, std::string(block) + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kConfig, "unknown config key '" + (block.empty() ? "" : std::string(block) + ".") + key + "'");
    }
  }
}

template <typename V>
void read(const json& obj, std::string_view block, const char* key, V& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<V>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kConfig, "config key '" + std::string(block) + "." + key + "' has the wrong type");
  }
}

template <typename V>
void read_optional(const json& obj, std::string_view block, const char* key, std::optional<V>& out) {
  if (!obj.contains(key)) return;
  if (obj.at(key).is_null()) {
    out.reset();
    return;
  }
  V v{};
  read(obj, block, key, v);
  out = v;
}

template <typename V>
json optional_json(const std::optional<V>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace detail

inline json to_json(const PipelineConfig& c) {
  const auto& n = c.neuron;
  return {
      {"neuron",
       {{"kind", std::string(spike::to_string(n.kind))}, {"c_m", n.c_m}, {"g_l", n.g_l}, {"e_l", n.e_l},
        {"threshold", n.threshold}, {"v_reset", n.v_reset}, {"refractory_steps", n.refractory_steps},
        {"qif_a", n.qif_a}, {"qif_v_c", n.qif_v_c}, {"eif_delta_t", n.eif_delta_t}, {"eif_v_t", n.eif_v_t},
        {"surrogate_width", n.surrogate_width}}},
      {"snn_layers", c.snn_layers},
      {"standardize_diff", c.standardize_diff},
      {"reasoner",
       {{"window", c.reasoner.window}, {"tau_cos", c.reasoner.tau_cos}, {"layers", c.reasoner.layers},
        {"hidden_dim", c.reasoner.hidden_dim}}},
      {"fusion",
       {{"orders", c.fusion.orders}, {"mu0", c.fusion.mu0}, {"sigma0_sq", c.fusion.sigma0_sq},
        {"sigmay_inv", c.fusion.sigmay_inv}}},
      {"text", {{"gate_dim", c.text.gate_dim}}},
      {"summary",
       {{"budget", c.summary.budget}, {"kts_penalty", detail::optional_json(c.summary.kts_penalty)},
        {"kts_max_segments", detail::optional_json(c.summary.kts_max_segments)}}},
      {"optimizer",
       {{"lr", c.optimizer.lr}, {"beta1", c.optimizer.beta1}, {"beta2", c.optimizer.beta2},
        {"eps", c.optimizer.eps}, {"weight_decay", c.optimizer.weight_decay}, {"dropout", c.optimizer.dropout},
        {"epochs", detail::optional_json(c.optimizer.epochs)}, {"batch_videos", c.optimizer.batch_videos},
        {"seed", c.optimizer.seed}}},
      {"split", {{"n_folds", c.split.n_folds}, {"fold_index", c.split.fold_index}}},
  };
}

/// Reads a config document; absent keys keep their defaults, unknown keys are
/// rejected.
inline PipelineConfig config_from_json(const json& doc) {
  using detail::read;
  using detail::read_optional;
  PipelineConfig c;
  detail::reject_unknown(doc, "", {"neuron", "snn_layers", "standardize_diff", "reasoner", "fusion", "text",
                                   "summary", "optimizer", "split"});
  if (doc.contains("neuron")) {
    const auto& j = doc.at("neuron");
    detail::reject_unknown(j, "neuron", {"kind", "c_m", "g_l", "e_l", "threshold", "v_reset", "refractory_steps",
                                         "qif_a", "qif_v_c", "eif_delta_t", "eif_v_t", "surrogate_width"});
    std::string kind(spike::to_string(c.neuron.kind));
    read(j, "neuron", "kind", kind);
    c.neuron.kind = spike::parse_neuron_kind(kind);
    read(j, "neuron", "c_m", c.neuron.c_m);
    read(j, "neuron", "g_l", c.neuron.g_l);
    read(j, "neuron", "e_l", c.neuron.e_l);
    read(j, "neuron", "threshold", c.neuron.threshold);
    read(j, "neuron", "v_reset", c.neuron.v_reset);
    read(j, "neuron", "refractory_steps", c.neuron.refractory_steps);
    read(j, "neuron", "qif_a", c.neuron.qif_a);
    read(j, "neuron", "qif_v_c", c.neuron.qif_v_c);
    read(j, "neuron", "eif_delta_t", c.neuron.eif_delta_t);
    read(j, "neuron", "eif_v_t", c.neuron.eif_v_t);
    read(j, "neuron", "surrogate_width", c.neuron.surrogate_width);
  }
  read(doc, "", "snn_layers", c.snn_layers);
  read(doc, "", "standardize_diff", c.standardize_diff);
  if (doc.contains("reasoner")) {
    const auto& j = doc.at("reasoner");
    detail::reject_unknown(j, "reasoner", {"window", "tau_cos", "layers", "hidden_dim"});
    read(j, "reasoner", "window", c.reasoner.window);
    read(j, "reasoner", "tau_cos", c.reasoner.tau_cos);
    read(j, "reasoner", "layers", c.reasoner.layers);
    read(j, "reasoner", "hidden_dim", c.reasoner.hidden_dim);
  }
  if (doc.contains("fusion")) {
    const auto& j = doc.at("fusion");
    detail::reject_unknown(j, "fusion", {"orders", "mu0", "sigma0_sq", "sigmay_inv"});
    read(j, "fusion", "orders", c.fusion.orders);
    read(j, "fusion", "mu0", c.fusion.mu0);
    read(j, "fusion", "sigma0_sq", c.fusion.sigma0_sq);
    read(j, "fusion", "sigmay_inv", c.fusion.sigmay_inv);
  }
  if (doc.contains("text")) {
    const auto& j = doc.at("text");
    detail::reject_unknown(j, "text", {"gate_dim"});
    read(j, "text", "gate_dim", c.text.gate_dim);
  }
  if (doc.contains("summary")) {
    const auto& j = doc.at("summary");
    detail::reject_unknown(j, "summary", {"budget", "kts_penalty", "kts_max_segments"});
    read(j, "summary", "budget", c.summary.budget);
    read_optional(j, "summary", "kts_penalty", c.summary.kts_penalty);
    read_optional(j, "summary", "kts_max_segments", c.summary.kts_max_segments);
  }
  if (doc.contains("optimizer")) {
    const auto& j = doc.at("optimizer");
    detail::reject_unknown(j, "optimizer", {"lr", "beta1", "beta2", "eps", "weight_decay", "dropout", "epochs",
                                            "batch_videos", "seed"});
    read(j, "optimizer", "lr", c.optimizer.lr);
    read(j, "optimizer", "beta1", c.optimizer.beta1);
    read(j, "optimizer", "beta2", c.optimizer.beta2);
    read(j, "optimizer", "eps", c.optimizer.eps);
    read(j, "optimizer", "weight_decay", c.optimizer.weight_decay);
    read(j, "optimizer", "dropout", c.optimizer.dropout);
    read_optional(j, "optimizer", "epochs", c.optimizer.epochs);
    read(j, "optimizer", "batch_videos", c.optimizer.batch_videos);
    read(j, "optimizer", "seed", c.optimizer.seed);
  }
  if (doc.contains("split")) {
    const auto& j = doc.at("split");
    detail::reject_unknown(j, "split", {"n_folds", "fold_index"});
    read(j, "split", "n_folds", c.split.n_folds);
    read(j, "split", "fold_index", c.split.fold_index);
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace spivg::pipeline
