#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "isoplan/render.hpp"
#include "isoplan/taskgraph.hpp"

namespace isoplan::datapipe {

/// Drops instances whose canonical form (task_name + sorted edges + duration
/// multiset) duplicates an earlier one. Stable, keep-first.
std::vector<taskgraph::PlanInstance> dedup(const std::vector<taskgraph::PlanInstance>& instances);

struct SplitResult {
  std::vector<taskgraph::PlanInstance> train;
  std::vector<taskgraph::PlanInstance> test;
};

/// Per-complexity-value stratified split: each bucket contributes
/// round-half-up(size * test_fraction) test items (at least 1 when the
/// bucket has >= 2). Split tags are written back onto the returned copies.
SplitResult stratified_split(const std::vector<taskgraph::PlanInstance>& instances,
                             double test_fraction, std::uint64_t seed);

struct CurriculumStage {
  std::string stage_name;
  render::Representation representation = render::Representation::NL;
  std::string prompt_file;  // relative to the manifest's directory
  int step_budget = 0;
};

struct CurriculumManifest {
  std::vector<CurriculumStage> stages;
  std::uint64_t seed = 0;
  std::string dataset_hash;
};

/// Renders the train set once per stage representation into prompt files
/// under out_dir and returns the manifest describing them. A zero second
/// budget collapses to a single-stage curriculum.
CurriculumManifest build_curriculum(const std::vector<taskgraph::PlanInstance>& train,
                                    render::Representation stage1_rep,
                                    render::Representation stage2_rep,
                                    std::pair<int, int> budgets, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

nlohmann::json to_json(const CurriculumManifest& manifest);
CurriculumManifest manifest_from_json(const nlohmann::json& record);
void save_manifest(const std::filesystem::path& path, const CurriculumManifest& manifest);
CurriculumManifest load_manifest(const std::filesystem::path& path);

enum class FormatHint { Auto, Canonical, AsyncHowLike };

FormatHint format_hint_from_string(const std::string& text);

struct QuarantineEntry {
  nlohmann::json record;
  std::string reason;
};

struct IngestResult {
  std::vector<taskgraph::PlanInstance> instances;
  std::vector<QuarantineEntry> quarantined;
};

/// Reads a JSONL file of canonical or AsyncHow-style records into validated
/// instances. Records that fail mapping or validation land in `quarantined`
/// with their reason; they never abort the batch.
IngestResult ingest(const std::filesystem::path& path, FormatHint hint = FormatHint::Auto);

void save_quarantine(const std::filesystem::path& path,
                     const std::vector<QuarantineEntry>& entries);

}  // namespace isoplan::datapipe
