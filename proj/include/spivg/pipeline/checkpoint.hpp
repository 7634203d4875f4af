#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spivg/error.hpp"
#include "spivg/gradtape/serialize.hpp"
#include "spivg/pipeline/config.hpp"
#include "spivg/pipeline/model.hpp"

namespace spivg::pipeline {

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainingMetadata {
  std::string dataset;
  int epochs = 0;
  int fold = 0;
  int n_folds = 5;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // mean training BCE per epoch
};

/// A trained model with the configuration and metadata needed to rebuild it.
struct Checkpoint {
  PipelineConfig config;
  TrainingMetadata meta;
  std::shared_ptr<Model<float>> model;

  nlohmann::json to_json() const {
    return {{"format_version", kCheckpointFormatVersion},
            {"config", pipeline::to_json(config)},
            {"feature_dim", model->feature_dim()},
            {"text_dim", model->text_dim()},
            {"parameters", grad::parameters_to_json(model->parameters())},
            {"metadata",
             {{"dataset", meta.dataset},
              {"epochs", meta.epochs},
              {"fold", meta.fold},
              {"n_folds", meta.n_folds},
              {"seed", meta.seed},
              {"loss_history", meta.loss_history}}}};
  }

  std::string dump() const { return to_json().dump() + "\n"; }

  static Checkpoint from_json(const nlohmann::json& doc) {
    try {
      if (doc.value("format_version", 0) != kCheckpointFormatVersion) {
        throw Error(ErrorCode::kFormat, "checkpoint: unsupported or missing format_version");
      }
      Checkpoint c;
      c.config = config_from_json(doc.at("config"));
      c.model = std::make_shared<Model<float>>(c.config, doc.at("feature_dim").get<std::size_t>(),
                                               doc.at("text_dim").get<std::size_t>());
      grad::parameters_from_json(doc.at("parameters"), c.model->parameters());
      const auto& m = doc.at("metadata");
      c.meta.dataset = m.at("dataset").get<std::string>();
      c.meta.epochs = m.at("epochs").get<int>();
      c.meta.fold = m.at("fold").get<int>();
      c.meta.n_folds = m.at("n_folds").get<int>();
      c.meta.seed = m.at("seed").get<std::uint64_t>();
      c.meta.loss_history = m.at("loss_history").get<std::vector<double>>();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, "checkpoint: " + std::string(e.what()));
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
    out << dump();
    if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint " + path.string());
  }

  static Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open checkpoint " + path.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kFormat, "checkpoint " + path.string() + ": " + e.what());
    }
    return from_json(doc);
  }
};

}  // namespace spivg::pipeline
