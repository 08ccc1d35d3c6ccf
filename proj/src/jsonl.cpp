#include "valence/util/jsonl.hpp"

#include <fstream>
#include <sstream>

namespace valence {

JsonlFile parse_jsonl(std::string_view text, const std::string& source) {
  JsonlFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    Json value;
    try {
      value = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!value.is_object()) throw ParseError(source, line_no, "record is not a JSON object");
    if (line_no == 1 && value.size() == 1 && value.contains("_header")) {
      out.header = value["_header"];
      continue;
    }
    out.records.push_back(std::move(value));
  }
  return out;
}

JsonlFile read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text(path), path.string());
}

std::string dump_jsonl(const Json& header, const std::vector<Json>& records) {
  std::string out;
  if (!header.is_null() && !header.empty()) {
    out += Json{{"_header", header}}.dump();
    out += '\n';
  }
  for (const Json& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const Json& header,
                 const std::vector<Json>& records) {
  write_text(path, dump_jsonl(header, records));
}

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
}

void write_json(const std::filesystem::path& path, const Json& value) {
  write_text(path, value.dump(2) + "\n");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace valence
