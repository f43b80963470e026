#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "isoplan/taskgraph.hpp"

namespace isoplan::render {

enum class Representation { NL, GRAPH, CODE };

std::string to_string(Representation representation);
Representation representation_from_string(const std::string& text);

struct RenderedPrompt {
  std::string instance_id;
  Representation representation = Representation::NL;
  std::string prompt_text;
  std::string gold_answer_text;  // "35 min", "2 hours", "35.0", ...
  Rational gold_minutes;
  std::uint64_t render_seed = 0;
};

RenderedPrompt render_nl(const taskgraph::PlanInstance& instance);
RenderedPrompt render_graph(const taskgraph::PlanInstance& instance);

struct CodeRenderOptions {
  /// Pins the alias of every augmented node, keyed by augmented node index
  /// (0 = START, 1..n = steps, n+1 = END). Intended for fixture tests; the
  /// normal path draws aliases from render_seed.
  std::optional<std::map<int, int>> alias_override;
};

RenderedPrompt render_code(const taskgraph::PlanInstance& instance, std::uint64_t render_seed,
                           const CodeRenderOptions& options = {});

RenderedPrompt render(const taskgraph::PlanInstance& instance, Representation representation,
                      std::uint64_t render_seed);

/// The adjacency and label maps recovered from a GRAPH prompt. Dummy edges
/// (out of START, into END) are dropped; durations are the label strings.
struct ParsedGraphPrompt {
  std::vector<std::pair<int, int>> edges;
  std::map<int, std::string> duration_text_by_step;
};

ParsedGraphPrompt parse_graph_prompt(const std::string& prompt_text);

nlohmann::json to_json(const RenderedPrompt& prompt);
RenderedPrompt prompt_from_json(const nlohmann::json& record);

std::vector<RenderedPrompt> load_prompts(const std::filesystem::path& path);
void save_prompts(const std::filesystem::path& path, const std::vector<RenderedPrompt>& prompts);

}  // namespace isoplan::render
