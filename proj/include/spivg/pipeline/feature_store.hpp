#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "spivg/error.hpp"
#include "spivg/gradtape/serialize.hpp"
#include "spivg/gradtape/tensor.hpp"
#include "spivg/metrics.hpp"

// On-disk dataset: <dir>/manifest.json plus one little-endian float32 blob per
// video holding its T x d features row-major.

namespace spivg::pipeline {

inline constexpr int kStoreFormatVersion = 1;

struct Query {
  std::string name;
  std::vector<float> vector;
};

struct Annotations {
  std::vector<metrics::Mask> user_summaries;
  std::vector<std::vector<double>> importance_scores;
};

struct VideoRecord {
  std::string id;
  grad::Tensor<float> features;  // [T x d]
  Annotations annotations;
  std::vector<Query> queries;

  std::size_t n_frames() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  const Query* find_query(const std::string& name) const {
    for (const auto& q : queries) {
      if (q.name == name) return &q;
    }
    return nullptr;
  }
};

struct FeatureStore {
  std::string dataset = "synthetic";
  std::vector<VideoRecord> videos;

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      if (videos[i].id == id) return i;
    }
    throw Error(ErrorCode::kNotFound, "unknown video id '" + id + "'");
  }

  /// Common feature dimension of all videos.
  std::size_t dim() const {
    if (videos.empty()) throw Error(ErrorCode::kInvalidArgument, "feature store is empty");
    for (const auto& v : videos) {
      if (v.dim() != videos.front().dim()) {
        throw Error(ErrorCode::kShapeMismatch, "video '" + v.id + "' has dim " + std::to_string(v.dim()) +
                                                   ", store uses " + std::to_string(videos.front().dim()));
      }
    }
    return videos.front().dim();
  }

  /// Common query dimension, 0 when no video carries queries.
  std::size_t text_dim() const {
    std::size_t d = 0;
    for (const auto& v : videos) {
      for (const auto& q : v.queries) {
        if (d == 0) d = q.vector.size();
        if (q.vector.size() != d) {
          throw Error(ErrorCode::kShapeMismatch, "video '" + v.id + "' query '" + q.name + "' has dim " +
                                                     std::to_string(q.vector.size()) + ", expected " +
                                                     std::to_string(d));
        }
      }
    }
    return d;
  }
};

namespace detail {

[[noreturn]] inline void video_error(ErrorCode code, const std::string& id, const std::string& what) {
  throw Error(code, "video '" + id + "': " + what);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace detail

/// Checks lengths, finiteness and annotation consistency of one record.
inline void validate_record(const VideoRecord& v) {
  const std::size_t n = v.n_frames();
  if (v.features.rank() != 2 || n == 0 || v.dim() == 0) {
    detail::video_error(ErrorCode::kFormat, v.id, "features must be a nonempty T x d matrix");
  }
  for (float f : v.features.data()) {
    if (!std::isfinite(f)) detail::video_error(ErrorCode::kFormat, v.id, "non-finite value in features");
  }
  for (const auto& u : v.annotations.user_summaries) {
    if (u.size() != n) {
      detail::video_error(ErrorCode::kFormat, v.id, "user summary of length " + std::to_string(u.size()) +
                                                        ", expected " + std::to_string(n));
    }
    for (auto b : u) {
      if (b > 1) detail::video_error(ErrorCode::kFormat, v.id, "user summaries must be binary");
    }
  }
  for (const auto& s : v.annotations.importance_scores) {
    if (s.size() != n) {
      detail::video_error(ErrorCode::kFormat, v.id, "importance scores of length " + std::to_string(s.size()) +
                                                        ", expected " + std::to_string(n));
    }
    for (double x : s) {
      if (!std::isfinite(x)) detail::video_error(ErrorCode::kFormat, v.id, "non-finite importance score");
    }
  }
  std::set<std::string> names;
  for (const auto& q : v.queries) {
    if (!names.insert(q.name).second) detail::video_error(ErrorCode::kFormat, v.id, "duplicate query '" + q.name + "'");
    if (q.vector.empty()) detail::video_error(ErrorCode::kFormat, v.id, "empty query vector '" + q.name + "'");
    for (float f : q.vector) {
      if (!std::isfinite(f)) detail::video_error(ErrorCode::kFormat, v.id, "non-finite query vector");
    }
  }
}

inline FeatureStore load_features(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw Error(ErrorCode::kIo, "no manifest.json in " + dir.string());
  }
  nlohmann::json manifest;
  try {
    std::ifstream in(manifest_path);
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, "manifest.json: " + std::string(e.what()));
  }
  FeatureStore store;
  try {
    if (manifest.value("format_version", 0) != kStoreFormatVersion) {
      throw Error(ErrorCode::kFormat, "manifest.json: unsupported format_version");
    }
    store.dataset = manifest.value("dataset", std::string("unknown"));
    std::set<std::string> ids;
    for (const auto& entry : manifest.at("videos")) {
      VideoRecord v;
      v.id = entry.at("id").get<std::string>();
      if (!ids.insert(v.id).second) detail::video_error(ErrorCode::kFormat, v.id, "duplicate video id");
      const auto n = entry.at("n_frames").get<std::size_t>();
      const auto d = entry.at("dim").get<std::size_t>();
      const auto blob = dir / entry.at("features").get<std::string>();
      if (!std::filesystem::exists(blob)) {
        detail::video_error(ErrorCode::kIo, v.id, "missing feature blob " + blob.string());
      }
      const auto bytes = detail::read_file(blob);
      const std::size_t expected = 4 * n * d;
      if (bytes.size() != expected) {
        detail::video_error(ErrorCode::kFormat, v.id, "feature blob has " + std::to_string(bytes.size()) +
                                                          " bytes, expected " + std::to_string(expected) +
                                                          " (4 * " + std::to_string(n) + " * " +
                                                          std::to_string(d) + ")");
      }
      v.features = grad::Tensor<float>({n, d}, grad::from_le_bytes(bytes));
      if (entry.contains("annotations")) {
        const auto& ann = entry.at("annotations");
        if (ann.contains("user_summaries")) {
          v.annotations.user_summaries = ann.at("user_summaries").get<std::vector<metrics::Mask>>();
        }
        if (ann.contains("importance_scores")) {
          v.annotations.importance_scores = ann.at("importance_scores").get<std::vector<std::vector<double>>>();
        }
      }
      if (entry.contains("queries")) {
        for (const auto& q : entry.at("queries")) {
          v.queries.push_back({q.at("name").get<std::string>(), q.at("vector").get<std::vector<float>>()});
        }
      }
      validate_record(v);
      store.videos.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, "manifest.json: " + std::string(e.what()));
  }
  return store;
}

inline void save_features(const FeatureStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = kStoreFormatVersion;
  manifest["dataset"] = store.dataset;
  manifest["videos"] = nlohmann::json::array();
  std::set<std::string> ids;
  for (const auto& v : store.videos) {
    validate_record(v);
    if (!ids.insert(v.id).second) detail::video_error(ErrorCode::kFormat, v.id, "duplicate video id");
    const std::string blob = v.id + ".f32";
    const auto bytes = grad::to_le_bytes(v.features.data());
    detail::write_file(dir / blob, std::string(bytes.begin(), bytes.end()));
    nlohmann::json entry = {{"id", v.id}, {"n_frames", v.n_frames()}, {"dim", v.dim()}, {"features", blob}};
    entry["annotations"] = {{"user_summaries", v.annotations.user_summaries},
                            {"importance_scores", v.annotations.importance_scores}};
    entry["queries"] = nlohmann::json::array();
    for (const auto& q : v.queries) entry["queries"].push_back({{"name", q.name}, {"vector", q.vector}});
    manifest["videos"].push_back(std::move(entry));
  }
  detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace spivg::pipeline
