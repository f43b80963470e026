#pragma once

#include <optional>
#include <string>
#include <vector>

#include "isoplan/rational.hpp"
#include "isoplan/render.hpp"

namespace isoplan::grade {

enum class Failure { NoAnswerTag, UnparseableTime, Mismatch };

std::string to_string(Failure failure);
Failure failure_from_string(const std::string& text);

struct GradeRecord {
  std::string instance_id;
  render::Representation representation = render::Representation::NL;
  std::string raw_response;
  std::optional<std::string> extracted_text;
  std::optional<Rational> extracted_minutes;
  bool correct = false;
  std::optional<Failure> failure;
};

/// The contents of the last well-formed <answer>...</answer> pair in the
/// response, whitespace-trimmed. nullopt when no pair exists.
std::optional<std::string> extract_answer(const std::string& response);

/// Duration text to exact minutes. Throws UnparseableTime.
Rational normalize_time(const std::string& text);
std::optional<Rational> try_normalize_time(const std::string& text);

struct GradeOptions {
  /// Additionally require the extracted text to equal gold_answer_text
  /// byte-for-byte (after trimming). Off by default: "1 hour" == "60 min".
  bool strict_text = false;
};

GradeRecord grade_response(const std::string& response, const render::RenderedPrompt& gold,
                           const GradeOptions& options = {});

struct ResponseRecord {
  std::string instance_id;
  render::Representation representation = render::Representation::NL;
  std::string model;
  std::string response_text;
};

nlohmann::json to_json(const ResponseRecord& record);
ResponseRecord response_from_json(const nlohmann::json& record);

nlohmann::json to_json(const GradeRecord& record);
GradeRecord grade_record_from_json(const nlohmann::json& record);

std::vector<ResponseRecord> load_responses(const std::filesystem::path& path);
void save_responses(const std::filesystem::path& path, const std::vector<ResponseRecord>& records);

std::vector<GradeRecord> load_grades(const std::filesystem::path& path);
void save_grades(const std::filesystem::path& path, const std::vector<GradeRecord>& records);

/// Grades every response against the prompt with the same
/// (instance_id, representation). Throws UnknownInstance when a response has
/// no matching prompt.
std::vector<GradeRecord> grade_all(const std::vector<ResponseRecord>& responses,
                                   const std::vector<render::RenderedPrompt>& prompts,
                                   const GradeOptions& options = {});

}  // namespace isoplan::grade
