#include "isoplan/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "isoplan/errors.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/timetext.hpp"

namespace isoplan::datapipe {

namespace {

std::string canonical_key(const taskgraph::PlanInstance& inst) {
  std::string key = inst.task_name;
  key += '\x1f';
  auto edges = inst.edges;
  std::sort(edges.begin(), edges.end());
  for (const auto& [u, v] : edges) {
    key += std::to_string(u) + ">" + std::to_string(v) + ";";
  }
  key += '\x1f';
  std::vector<std::string> durations;
  for (const auto& s : inst.steps) durations.push_back(s.duration_minutes.to_decimal_string());
  std::sort(durations.begin(), durations.end());
  for (const auto& d : durations) {
    key += d;
    key += ',';
  }
  return key;
}

}  // namespace

std::vector<taskgraph::PlanInstance> dedup(const std::vector<taskgraph::PlanInstance>& instances) {
  std::set<std::string> seen;
  std::vector<taskgraph::PlanInstance> out;
  for (const auto& inst : instances) {
    if (seen.insert(canonical_key(inst)).second) out.push_back(inst);
  }
  return out;
}

SplitResult stratified_split(const std::vector<taskgraph::PlanInstance>& instances,
                             double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("stratified_split: test_fraction must lie in (0, 1)");
  }

  std::map<int, std::vector<size_t>> buckets;  // complexity -> input positions
  for (size_t i = 0; i < instances.size(); ++i) {
    buckets[taskgraph::complexity(instances[i])].push_back(i);
  }

  std::vector<bool> is_test(instances.size(), false);
  for (auto& [complexity_value, positions] : buckets) {
    const size_t size = positions.size();
    size_t take = static_cast<size_t>(std::floor(static_cast<double>(size) * test_fraction + 0.5));
    if (size >= 2 && take == 0) take = 1;
    if (take > size) take = size;

    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(complexity_value)));
    std::vector<size_t> order = positions;
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = rng() % i;
      std::swap(order[i - 1], order[j]);
    }
    for (size_t i = 0; i < take; ++i) is_test[order[i]] = true;
  }

  SplitResult result;
  for (size_t i = 0; i < instances.size(); ++i) {
    taskgraph::PlanInstance copy = instances[i];
    copy.split = is_test[i] ? taskgraph::Split::Test : taskgraph::Split::Train;
    (is_test[i] ? result.test : result.train).push_back(std::move(copy));
  }
  return result;
}

CurriculumManifest build_curriculum(const std::vector<taskgraph::PlanInstance>& train,
                                    render::Representation stage1_rep,
                                    render::Representation stage2_rep,
                                    std::pair<int, int> budgets, std::uint64_t seed,
                                    const std::filesystem::path& out_dir) {
  if (budgets.first <= 0) throw Error("build_curriculum: stage 1 budget must be positive");
  if (budgets.second < 0) throw Error("build_curriculum: stage 2 budget must be >= 0");
  if (train.empty()) throw Error("build_curriculum: empty train set");

  std::filesystem::create_directories(out_dir);

  CurriculumManifest manifest;
  manifest.seed = seed;
  manifest.dataset_hash = taskgraph::dataset_hash(train);

  struct StagePlan {
    std::string name;
    render::Representation rep;
    int budget;
  };
  std::vector<StagePlan> plans;
  plans.push_back({"stage1_" + render::to_string(stage1_rep), stage1_rep, budgets.first});
  if (budgets.second > 0) {
    plans.push_back({"stage2_" + render::to_string(stage2_rep), stage2_rep, budgets.second});
  }

  for (const auto& plan : plans) {
    std::vector<render::RenderedPrompt> prompts;
    prompts.reserve(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
      prompts.push_back(
          render::render(train[i], plan.rep, mix_seed(seed, static_cast<std::uint64_t>(i))));
    }
    const std::string file_name = plan.name + ".jsonl";
    render::save_prompts(out_dir / file_name, prompts);

    CurriculumStage stage;
    stage.stage_name = plan.name;
    stage.representation = plan.rep;
    stage.prompt_file = file_name;
    stage.step_budget = plan.budget;
    manifest.stages.push_back(std::move(stage));
  }
  return manifest;
}

nlohmann::json to_json(const CurriculumManifest& manifest) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : manifest.stages) {
    stages.push_back({
        {"stage_name", stage.stage_name},
        {"representation", render::to_string(stage.representation)},
        {"prompt_file", stage.prompt_file},
        {"step_budget", stage.step_budget},
    });
  }
  return nlohmann::json{
      {"stages", std::move(stages)},
      {"seed", manifest.seed},
      {"dataset_hash", manifest.dataset_hash},
  };
}

CurriculumManifest manifest_from_json(const nlohmann::json& record) {
  if (!record.is_object() || !record.contains("stages") || !record["stages"].is_array()) {
    throw SchemaMismatch("curriculum manifest is malformed");
  }
  CurriculumManifest manifest;
  manifest.seed = record.value("seed", 0ULL);
  manifest.dataset_hash = record.value("dataset_hash", std::string());
  std::set<std::string> names;
  for (const auto& s : record["stages"]) {
    CurriculumStage stage;
    stage.stage_name = s.at("stage_name").get<std::string>();
    stage.representation = render::representation_from_string(s.at("representation").get<std::string>());
    stage.prompt_file = s.at("prompt_file").get<std::string>();
    stage.step_budget = s.at("step_budget").get<int>();
    if (!names.insert(stage.stage_name).second) {
      throw SchemaMismatch("curriculum manifest repeats stage name " + stage.stage_name);
    }
    manifest.stages.push_back(std::move(stage));
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path, const CurriculumManifest& manifest) {
  write_text_file(path, to_json(manifest).dump(2) + "\n");
}

CurriculumManifest load_manifest(const std::filesystem::path& path) {
  return manifest_from_json(nlohmann::json::parse(read_text_file(path)));
}

FormatHint format_hint_from_string(const std::string& text) {
  if (text == "auto") return FormatHint::Auto;
  if (text == "canonical") return FormatHint::Canonical;
  if (text == "asynchow") return FormatHint::AsyncHowLike;
  throw UnknownFormat("unknown ingest format '" + text + "' (expected auto|canonical|asynchow)");
}

namespace {

bool looks_canonical(const nlohmann::json& record) {
  return record.is_object() && record.contains("instance_id") && record.contains("steps") &&
         record["steps"].is_array();
}

bool looks_asynchow(const nlohmann::json& record) {
  return record.is_object() &&
         (record.contains("task") || record.contains("time") ||
          (record.contains("steps") && record["steps"].is_object()));
}

bool is_dummy_name(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return name == "START" || name == "END";
}

/// Best-effort adapter for AsyncHow-shaped records: steps/time as dicts or
/// arrays keyed by step number, dependencies with optional START/END rows.
taskgraph::PlanInstance from_asynchow(const nlohmann::json& record, size_t line_no) {
  taskgraph::PlanInstance inst;
  inst.instance_id = record.contains("id") && record["id"].is_string()
                         ? record["id"].get<std::string>()
                         : "ingest-" + std::to_string(line_no);
  if (record.contains("task") && record["task"].is_string()) {
    inst.task_name = record["task"].get<std::string>();
  } else {
    throw SchemaMismatch("record has no task name");
  }

  // Step descriptions keyed by source step number.
  std::map<int, std::string> descriptions;
  if (record.contains("steps") && record["steps"].is_object()) {
    for (const auto& [key, value] : record["steps"].items()) {
      descriptions[std::stoi(key)] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  } else if (record.contains("steps") && record["steps"].is_array()) {
    int next = 1;
    for (const auto& value : record["steps"]) {
      descriptions[next++] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  } else {
    throw SchemaMismatch("record has no steps");
  }

  std::map<int, std::string> durations;
  if (record.contains("time") && record["time"].is_object()) {
    for (const auto& [key, value] : record["time"].items()) {
      durations[std::stoi(key)] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  } else if (record.contains("time") && record["time"].is_array()) {
    int next = 1;
    for (const auto& value : record["time"]) {
      durations[next++] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  } else {
    throw SchemaMismatch("record has no step times");
  }

  // Renumber source step keys densely to 1..n in ascending key order.
  std::map<int, int> renumber;
  for (const auto& [key, desc] : descriptions) {
    int id = static_cast<int>(renumber.size()) + 1;
    renumber[key] = id;
    taskgraph::StepNode step;
    step.id = id;
    step.description = desc;
    auto it = durations.find(key);
    if (it == durations.end()) {
      throw SchemaMismatch("step " + std::to_string(key) + " has no time entry");
    }
    step.duration_text = it->second;
    auto parsed = timetext::parse_duration(step.duration_text);
    if (!parsed) {
      throw UnparseableTime("step " + std::to_string(key) + " time '" + step.duration_text +
                            "' does not parse");
    }
    step.duration_minutes = *parsed;
    inst.steps.push_back(std::move(step));
  }

  const char* edge_key = record.contains("edges")          ? "edges"
                         : record.contains("dependencies") ? "dependencies"
                                                           : nullptr;
  if (edge_key) {
    if (!record[edge_key].is_array()) throw SchemaMismatch("edge list is not an array");
    for (const auto& e : record[edge_key]) {
      if (!e.is_array() || e.size() != 2) throw SchemaMismatch("edge is not a pair");
      auto endpoint = [&](const nlohmann::json& v) -> std::optional<int> {
        if (v.is_number_integer()) return v.get<int>();
        if (v.is_string()) {
          const std::string s = v.get<std::string>();
          if (is_dummy_name(s)) return std::nullopt;
          if (s.find_first_not_of("0123456789") != std::string::npos) {
            throw SchemaMismatch("edge endpoint '" + s + "' is not a step");
          }
          return std::stoi(s);
        }
        throw SchemaMismatch("edge endpoint has unexpected type");
      };
      auto u = endpoint(e[0]);
      auto v = endpoint(e[1]);
      if (!u || !v) continue;  // dummy-incident rows from the source
      auto iu = renumber.find(*u);
      auto iv = renumber.find(*v);
      if (iu == renumber.end() || iv == renumber.end()) {
        throw DanglingEdge("edge (" + std::to_string(*u) + ", " + std::to_string(*v) +
                           ") references a missing step");
      }
      inst.edges.push_back({iu->second, iv->second});
    }
    std::sort(inst.edges.begin(), inst.edges.end());
  }

  nlohmann::json meta;
  for (const auto& [key, value] : record.items()) {
    if (std::string(key) == "task" || key == "steps" || key == "time" ||
        (edge_key && key == edge_key) || key == "id") {
      continue;
    }
    meta[key] = value;
  }
  if (!meta.is_null()) inst.meta = meta;
  return inst;
}

}  // namespace

IngestResult ingest(const std::filesystem::path& path, FormatHint hint) {
  IngestResult result;
  for (const auto& line : read_jsonl(path, /*lenient=*/true)) {
    const nlohmann::json& record = line.value;
    if (record.is_object() && record.contains("__error")) {
      result.quarantined.push_back({record, "malformed JSON line"});
      continue;
    }
    try {
      taskgraph::PlanInstance inst;
      const bool canonical =
          hint == FormatHint::Canonical || (hint == FormatHint::Auto && looks_canonical(record));
      if (canonical) {
        inst = taskgraph::instance_from_json(record);
      } else if (hint == FormatHint::AsyncHowLike ||
                 (hint == FormatHint::Auto && looks_asynchow(record))) {
        inst = from_asynchow(record, line.line_no);
      } else {
        throw UnknownFormat("record matches no known shape");
      }
      taskgraph::validate(inst);
      result.instances.push_back(std::move(inst));
    } catch (const Error& e) {
      result.quarantined.push_back({record, e.what()});
    } catch (const std::exception& e) {
      result.quarantined.push_back({record, std::string("unexpected: ") + e.what()});
    }
  }
  return result;
}

void save_quarantine(const std::filesystem::path& path,
                     const std::vector<QuarantineEntry>& entries) {
  std::vector<nlohmann::json> rows;
  rows.reserve(entries.size());
  for (const auto& entry : entries) {
    rows.push_back({{"record", entry.record}, {"reason", entry.reason}});
  }
  write_jsonl(path, rows);
}

}  // namespace isoplan::datapipe
