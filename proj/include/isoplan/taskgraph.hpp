#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isoplan/rational.hpp"
#include "nlohmann/json.hpp"

namespace isoplan::taskgraph {

enum class Split { Unassigned, Train, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& text);

struct StepNode {
  int id = 0;  // 1-based position in the plan
  std::string description;
  std::string duration_text;
  Rational duration_minutes;
};

struct PlanInstance {
  std::string instance_id;
  std::string task_name;
  std::vector<StepNode> steps;                // ordered, ids 1..n
  std::vector<std::pair<int, int>> edges;     // (before, after) step ids
  Split split = Split::Unassigned;
  nlohmann::json meta;                        // source fields preserved verbatim

  const StepNode* find_step(int id) const;
};

/// The instance graph with START/END dummies attached. Node 0 is START,
/// nodes 1..step_count are the steps, node step_count+1 is END. START feeds
/// every source step; every sink step feeds END; dummies take zero time.
struct AugmentedGraph {
  int step_count = 0;
  std::vector<std::vector<int>> successors;
  std::vector<Rational> durations;

  int start_node() const { return 0; }
  int end_node() const { return step_count + 1; }
  int node_count() const { return step_count + 2; }
  int edge_count() const;
};

/// Structural validation. Throws InvalidInstance (empty plan, bad ids,
/// duplicate edges, duration text that does not parse or disagrees with the
/// stored minutes), DanglingEdge (edge endpoint not a step id) or
/// CyclicGraph (self-loop or directed cycle).
void validate(const PlanInstance& instance);

/// Non-fatal findings on otherwise valid instances (zero-duration steps).
std::vector<std::string> validation_warnings(const PlanInstance& instance);

AugmentedGraph augment(const PlanInstance& instance);

/// Minimum completion time under unlimited parallelism: the longest
/// START -> END path, summing step durations along the way.
Rational longest_path_minutes(const AugmentedGraph& graph);
Rational longest_path_minutes(const PlanInstance& instance);

/// Node count plus edge count of the augmented graph.
int complexity(const PlanInstance& instance);

struct GenerateOptions {
  int count = 1;
  int min_complexity = 5;
  int max_complexity = 20;
  std::vector<std::string> duration_vocab;  // e.g. {"5 min", "1 hour"}
  std::uint64_t seed = 0;
};

/// Random plan instances with exact complexity values drawn from the
/// achievable subset of [min_complexity, max_complexity]. Deterministic for
/// a fixed option set. Throws InfeasibleRange when no achievable complexity
/// falls inside the range, InvalidInstance on a bad duration vocabulary.
std::vector<PlanInstance> generate(const GenerateOptions& options);

nlohmann::json to_json(const PlanInstance& instance);
PlanInstance instance_from_json(const nlohmann::json& record);

std::vector<PlanInstance> load_instances(const std::filesystem::path& path);
void save_instances(const std::filesystem::path& path, const std::vector<PlanInstance>& instances);

/// FNV-1a digest of the canonical serialization, order-sensitive. Used to
/// key similarity caches and curriculum manifests.
std::string dataset_hash(const std::vector<PlanInstance>& instances);

}  // namespace isoplan::taskgraph
