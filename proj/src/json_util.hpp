#pragma once

#include "phytotwin/error.hpp"
#include "phytotwin/geom.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace phytotwin::detail {

using nlohmann::json;

inline json vec_to_json(const geom::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline geom::Vec3 vec_from_json(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::ParseError, std::string(what) + ": expected 3-vector");
  }
  geom::Vec3 v;
  for (int i = 0; i < 3; ++i) {
    const auto& e = j[static_cast<std::size_t>(i)];
    if (!e.is_number()) throw Error(ErrorCode::ParseError, std::string(what) + ": non-numeric entry");
    v[i] = e.get<double>();
  }
  return v;
}

inline json pose_to_json(const geom::RigidTransform& t) {
  auto m = t.to_matrix34();
  return json(std::vector<double>(m.begin(), m.end()));
}

inline geom::RigidTransform pose_from_json(const json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 12) {
    throw Error(ErrorCode::ParseError, std::string(what) + ": expected 3x4 row-major pose");
  }
  std::vector<double> v;
  for (const auto& e : j) {
    if (!e.is_number()) throw Error(ErrorCode::ParseError, std::string(what) + ": non-numeric entry");
    v.push_back(e.get<double>());
  }
  return geom::RigidTransform::from_matrix34(v);
}

inline const json& require(const json& obj, std::string_view key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::ParseError, "missing field '" + std::string(key) + "'");
  }
  return obj.at(std::string(key));
}

inline double require_number(const json& obj, std::string_view key) {
  const auto& v = require(obj, key);
  if (!v.is_number()) throw Error(ErrorCode::ParseError, "field '" + std::string(key) + "' is not a number");
  return v.get<double>();
}

inline void check_version(const json& doc, std::string_view expected) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_string()) {
    throw Error(ErrorCode::VersionMismatch, "missing version field, expected " + std::string(expected));
  }
  auto got = doc["version"].get<std::string>();
  if (got != expected) {
    throw Error(ErrorCode::VersionMismatch, "expected " + std::string(expected) + ", found " + got);
  }
}

inline json parse_json_text(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  out << text;
}

inline std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace phytotwin::detail
