#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "spivg/error.hpp"
#include "spivg/gradtape/linear.hpp"

namespace spivg::grad {

inline constexpr int kParameterFormatVersion = 1;

namespace base64 {

inline constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> decode(std::string_view text) {
  std::array<int, 256> lookup{};
  lookup.fill(-1);
  for (std::size_t k = 0; k < kAlphabet.size(); ++k) {
    lookup[static_cast<unsigned char>(kAlphabet[k])] = static_cast<int>(k);
  }
  if (text.size() % 4 != 0) throw Error(ErrorCode::kFormat, "base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lookup[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw Error(ErrorCode::kFormat, "base64: invalid character");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

}  // namespace base64

/// float32 values as little-endian bytes.
inline std::vector<std::uint8_t> to_le_bytes(std::span<const float> values) {
  std::vector<std::uint8_t> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return bytes;
}

inline std::vector<float> from_le_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorCode::kFormat, "float32 payload of " + std::to_string(bytes.size()) +
                                        " bytes is not a multiple of 4");
  }
  std::vector<float> values(bytes.size() / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return values;
}

/// {"format_version": 1, "parameters": {path: {"shape": [...], "data": base64}}}
template <typename T>
nlohmann::json parameters_to_json(const ParamList<T>& params) {
  nlohmann::json doc;
  doc["format_version"] = kParameterFormatVersion;
  nlohmann::json& table = doc["parameters"];
  table = nlohmann::json::object();
  for (const auto& [path, tensor] : params) {
    std::vector<float> values(tensor->data().begin(), tensor->data().end());
    table[path] = {{"shape", tensor->shape()}, {"data", base64::encode(to_le_bytes(values))}};
  }
  return doc;
}

/// Loads values into already-shaped tensors; every registered path must be
/// present with an identical shape.
template <typename T>
void parameters_from_json(const nlohmann::json& doc, const ParamList<T>& params) {
  if (!doc.contains("format_version") || doc.at("format_version") != kParameterFormatVersion) {
    throw Error(ErrorCode::kFormat, "parameters: unsupported or missing format_version");
  }
  const auto& table = doc.at("parameters");
  for (const auto& [path, tensor] : params) {
    if (!table.contains(path)) throw Error(ErrorCode::kFormat, "parameters: missing " + path);
    const auto& entry = table.at(path);
    const auto shape = entry.at("shape").template get<Shape>();
    if (shape != tensor->shape()) {
      throw Error(ErrorCode::kShapeMismatch, "parameters: " + path + " stored as " +
                                                 shape_str(shape) + ", model expects " +
                                                 shape_str(tensor->shape()));
    }
    const auto bytes = base64::decode(entry.at("data").template get<std::string>());
    const auto values = from_le_bytes(bytes);
    if (values.size() != tensor->size()) {
      throw Error(ErrorCode::kFormat, "parameters: payload size mismatch for " + path);
    }
    for (std::size_t i = 0; i < values.size(); ++i) (*tensor)[i] = static_cast<T>(values[i]);
  }
}

}  // namespace spivg::grad
