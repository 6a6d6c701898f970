#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

#include "wsp/error.hpp"

namespace wsp::jsonu {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key) {
  if (!j.is_object()) throw ValidationError(key, "record is not a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(key, "missing field");
  return *it;
}

inline std::string get_string(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw ValidationError(key, "expected a string");
  return v.get<std::string>();
}

inline std::int64_t get_int(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_number_integer()) throw ValidationError(key, "expected an integer");
  return v.get<std::int64_t>();
}

inline double get_number(const json& j, const std::string& key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw ValidationError(key, "expected a number");
  return v.get<double>();
}

/// Parses one JSON line; errors carry the file path and line number.
inline json parse_line(const std::string& text, const std::string& path, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw LineError(path, line, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace wsp::jsonu
