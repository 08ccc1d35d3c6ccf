#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "valence/error.hpp"

namespace valence {

using Json = nlohmann::json;

/// A line-oriented record file. Artifacts written by this project may start
/// with one `{"_header": {...}}` line carrying seed/config provenance; readers
/// strip it into `header` and never see it as a record.
struct JsonlFile {
  Json header = Json::object();
  std::vector<Json> records;
};

JsonlFile parse_jsonl(std::string_view text, const std::string& source = "<memory>");
JsonlFile read_jsonl(const std::filesystem::path& path);

/// Serializes header (omitted when null or empty) and records, one compact
/// JSON object per line. Object keys are emitted sorted, so output is
/// byte-stable for equal inputs.
std::string dump_jsonl(const Json& header, const std::vector<Json>& records);
void write_jsonl(const std::filesystem::path& path, const Json& header,
                 const std::vector<Json>& records);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Field access that reports the missing or mistyped key by name.
template <typename T>
T require_field(const Json& obj, const char* key) {
  if (!obj.is_object()) throw ValidationError("expected a JSON object");
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T optional_field(const Json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace valence
