#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "isoplan/errors.hpp"
#include "nlohmann/json.hpp"

namespace isoplan {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

/// One parsed line of a JSONL file, with its 1-based line number kept for
/// error reporting.
struct JsonlLine {
  nlohmann::json value;
  size_t line_no = 0;
};

/// Reads every non-empty line. With lenient=false a malformed line throws
/// SchemaMismatch; with lenient=true the line is returned as a string value
/// wrapped in {"__raw": ..., "__error": ...} so callers can quarantine it.
inline std::vector<JsonlLine> read_jsonl(const std::filesystem::path& path, bool lenient = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<JsonlLine> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json parsed = nlohmann::json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      if (!lenient) {
        throw SchemaMismatch(path.string() + ":" + std::to_string(line_no) + ": malformed JSON line");
      }
      parsed = nlohmann::json{{"__raw", line}, {"__error", "malformed JSON"}};
    }
    out.push_back({std::move(parsed), line_no});
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

}  // namespace isoplan
