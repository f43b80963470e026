#include "isoplan/grade.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "isoplan/errors.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/timetext.hpp"

namespace isoplan::grade {

std::string to_string(Failure failure) {
  switch (failure) {
    case Failure::NoAnswerTag: return "no_answer_tag";
    case Failure::UnparseableTime: return "unparseable_time";
    case Failure::Mismatch: return "mismatch";
  }
  return "mismatch";
}

Failure failure_from_string(const std::string& text) {
  if (text == "no_answer_tag") return Failure::NoAnswerTag;
  if (text == "unparseable_time") return Failure::UnparseableTime;
  if (text == "mismatch") return Failure::Mismatch;
  throw SchemaMismatch("unknown failure kind: " + text);
}

namespace {

std::string trim_copy(const std::string& s) {
  size_t begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  size_t end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& response) {
  const std::string open = "<answer>";
  const std::string close = "</answer>";
  std::optional<std::string> found;
  size_t pos = 0;
  while (true) {
    size_t start = response.find(open, pos);
    if (start == std::string::npos) break;
    size_t body = start + open.size();
    size_t end = response.find(close, body);
    if (end == std::string::npos) break;
    found = trim_copy(response.substr(body, end - body));
    pos = end + close.size();
  }
  return found;
}

Rational normalize_time(const std::string& text) {
  auto parsed = timetext::parse_duration(text);
  if (!parsed) throw UnparseableTime("cannot parse duration '" + text + "'");
  if (parsed->is_negative()) throw UnparseableTime("negative duration '" + text + "'");
  return *parsed;
}

std::optional<Rational> try_normalize_time(const std::string& text) {
  auto parsed = timetext::parse_duration(text);
  if (parsed && parsed->is_negative()) return std::nullopt;
  return parsed;
}

GradeRecord grade_response(const std::string& response, const render::RenderedPrompt& gold,
                           const GradeOptions& options) {
  GradeRecord record;
  record.instance_id = gold.instance_id;
  record.representation = gold.representation;
  record.raw_response = response;

  record.extracted_text = extract_answer(response);
  if (!record.extracted_text) {
    record.failure = Failure::NoAnswerTag;
    return record;
  }
  record.extracted_minutes = try_normalize_time(*record.extracted_text);
  if (!record.extracted_minutes) {
    record.failure = Failure::UnparseableTime;
    return record;
  }
  bool equal = *record.extracted_minutes == gold.gold_minutes;
  if (equal && options.strict_text) {
    equal = *record.extracted_text == gold.gold_answer_text;
  }
  if (!equal) {
    record.failure = Failure::Mismatch;
    return record;
  }
  record.correct = true;
  return record;
}

nlohmann::json to_json(const ResponseRecord& record) {
  return nlohmann::json{
      {"instance_id", record.instance_id},
      {"representation", render::to_string(record.representation)},
      {"model", record.model},
      {"response_text", record.response_text},
  };
}

ResponseRecord response_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw SchemaMismatch("response record is not an object");
  for (const char* key : {"instance_id", "representation", "model", "response_text"}) {
    if (!record.contains(key) || !record[key].is_string()) {
      throw SchemaMismatch(std::string("response record missing string field '") + key + "'");
    }
  }
  ResponseRecord out;
  out.instance_id = record["instance_id"].get<std::string>();
  out.representation = render::representation_from_string(record["representation"].get<std::string>());
  out.model = record["model"].get<std::string>();
  out.response_text = record["response_text"].get<std::string>();
  return out;
}

nlohmann::json to_json(const GradeRecord& record) {
  nlohmann::json out{
      {"instance_id", record.instance_id},
      {"representation", render::to_string(record.representation)},
      {"raw_response", record.raw_response},
      {"correct", record.correct},
  };
  out["extracted_text"] =
      record.extracted_text ? nlohmann::json(*record.extracted_text) : nlohmann::json();
  out["extracted_minutes"] = record.extracted_minutes
                                 ? nlohmann::json(record.extracted_minutes->to_double())
                                 : nlohmann::json();
  out["failure"] = record.failure ? nlohmann::json(to_string(*record.failure)) : nlohmann::json();
  return out;
}

GradeRecord grade_record_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw SchemaMismatch("grade record is not an object");
  for (const char* key : {"instance_id", "representation", "raw_response", "correct"}) {
    if (!record.contains(key)) {
      throw SchemaMismatch(std::string("grade record missing field '") + key + "'");
    }
  }
  GradeRecord out;
  out.instance_id = record["instance_id"].get<std::string>();
  out.representation = render::representation_from_string(record["representation"].get<std::string>());
  out.raw_response = record["raw_response"].get<std::string>();
  out.correct = record["correct"].get<bool>();
  if (record.contains("extracted_text") && !record["extracted_text"].is_null()) {
    out.extracted_text = record["extracted_text"].get<std::string>();
  }
  if (record.contains("extracted_minutes") && !record["extracted_minutes"].is_null()) {
    double v = record["extracted_minutes"].get<double>();
    if (out.extracted_text) {
      auto exact = try_normalize_time(*out.extracted_text);
      if (exact && std::abs(exact->to_double() - v) <= 1e-9) {
        out.extracted_minutes = *exact;
      }
    }
  }
  if (record.contains("failure") && !record["failure"].is_null()) {
    out.failure = failure_from_string(record["failure"].get<std::string>());
  }
  return out;
}

std::vector<ResponseRecord> load_responses(const std::filesystem::path& path) {
  std::vector<ResponseRecord> out;
  for (const auto& line : read_jsonl(path)) out.push_back(response_from_json(line.value));
  return out;
}

void save_responses(const std::filesystem::path& path, const std::vector<ResponseRecord>& records) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

std::vector<GradeRecord> load_grades(const std::filesystem::path& path) {
  std::vector<GradeRecord> out;
  for (const auto& line : read_jsonl(path)) out.push_back(grade_record_from_json(line.value));
  return out;
}

void save_grades(const std::filesystem::path& path, const std::vector<GradeRecord>& records) {
  std::vector<nlohmann::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

std::vector<GradeRecord> grade_all(const std::vector<ResponseRecord>& responses,
                                   const std::vector<render::RenderedPrompt>& prompts,
                                   const GradeOptions& options) {
  std::map<std::pair<std::string, std::string>, const render::RenderedPrompt*> index;
  for (const auto& p : prompts) {
    index[{p.instance_id, render::to_string(p.representation)}] = &p;
  }
  std::vector<GradeRecord> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    auto it = index.find({r.instance_id, render::to_string(r.representation)});
    if (it == index.end()) {
      throw UnknownInstance("no prompt for response (" + r.instance_id + ", " +
                            render::to_string(r.representation) + ")");
    }
    out.push_back(grade_response(r.response_text, *it->second, options));
  }
  return out;
}

}  // namespace isoplan::grade
