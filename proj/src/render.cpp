#include "isoplan/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "isoplan/errors.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/timetext.hpp"

namespace isoplan::render {

namespace {

constexpr const char* kAnswerTagHintTime =
    "Think step by step. Then, encode your final answer in <answer></answer> "
    "(e.g. <answer>1 min</answer>)";

constexpr const char* kLongestPathFunction =
    R"(import networkx as nx

def find_longest_path_from_source_to_target(weighted_adj_list,
source, target):
    G = nx.DiGraph()
    for src, neighbors in weighted_adj_list.items():
        for tgt, weight in neighbors:
            G.add_edge(src, tgt, weight=weight)

    topo_order = list(nx.topological_sort(G))
    dist = {node: float('-inf') for node in G.nodes}
    pred = {node: None for node in G.nodes}
    dist[source] = 0

    for u in topo_order:
        for v in G.successors(u):
            weight = G[u][v]['weight']
            if dist[u] + weight > dist[v]:
                dist[v] = dist[u] + weight
                pred[v] = u

    if dist[target] == float('-inf'):
        return None, []

    path = []
    current = target
    while current is not None:
        path.append(current)
        current = pred[current]
    path.reverse()

    return dist[target])";

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

/// Critical-path duration for display: the largest unit no finer than the
/// finest one any step uses that still gives an integral count; exact
/// decimal minutes otherwise.
std::string gold_display_text(const taskgraph::PlanInstance& instance, const Rational& gold) {
  std::optional<timetext::UnitFamily> shared;
  bool mixed = false;
  for (const auto& step : instance.steps) {
    auto family = timetext::duration_text_family(step.duration_text);
    if (!family) {
      mixed = true;
      break;
    }
    if (!shared ||
        timetext::family_minutes(*family) < timetext::family_minutes(*shared)) {
      shared = family;
    }
  }
  if (!mixed && shared) {
    const timetext::UnitFamily descending[] = {
        timetext::UnitFamily::Week, timetext::UnitFamily::Day,
        timetext::UnitFamily::Hour, timetext::UnitFamily::Minute};
    for (timetext::UnitFamily family : descending) {
      if (timetext::family_minutes(family) > timetext::family_minutes(*shared)) continue;
      Rational in_unit = gold / Rational(timetext::family_minutes(family));
      if (in_unit.is_integer()) return timetext::count_with_unit(in_unit.num(), family);
    }
  }
  return gold.to_decimal_string() + " min";
}

/// Augmented nodes in the order the prompt listings use: steps ascending,
/// then END, then START.
std::vector<int> listing_order(const taskgraph::AugmentedGraph& g) {
  std::vector<int> order;
  order.reserve(g.node_count());
  for (int id = 1; id <= g.step_count; ++id) order.push_back(id);
  order.push_back(g.end_node());
  order.push_back(g.start_node());
  return order;
}

std::string node_name(const taskgraph::AugmentedGraph& g, int node) {
  if (node == g.start_node()) return "START";
  if (node == g.end_node()) return "END";
  return std::to_string(node);
}

std::string quoted(const std::string& s) { return "'" + s + "'"; }

}  // namespace

std::string to_string(Representation representation) {
  switch (representation) {
    case Representation::NL: return "NL";
    case Representation::GRAPH: return "GRAPH";
    case Representation::CODE: return "CODE";
  }
  return "NL";
}

Representation representation_from_string(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "NL") return Representation::NL;
  if (upper == "GRAPH") return Representation::GRAPH;
  if (upper == "CODE") return Representation::CODE;
  throw SchemaMismatch("unknown representation: " + text);
}

RenderedPrompt render_nl(const taskgraph::PlanInstance& instance) {
  taskgraph::validate(instance);
  Rational gold = taskgraph::longest_path_minutes(instance);

  std::vector<std::string> lines;
  lines.push_back("To " + instance.task_name +
                  ", here are the steps and the times needed for each step.");
  for (const auto& step : instance.steps) {
    lines.push_back("Step " + std::to_string(step.id) + ". " + step.description + " (" +
                    step.duration_text + ")");
  }
  lines.push_back("");
  lines.push_back("");
  lines.push_back("These ordering constraints need to be obeyed when executing above steps:");
  auto edges = instance.edges;
  std::sort(edges.begin(), edges.end());
  for (const auto& [u, v] : edges) {
    lines.push_back("Step " + std::to_string(u) + " must precede step " + std::to_string(v) + ".");
  }
  lines.push_back("");
  lines.push_back("");
  lines.push_back(
      "Question: Assume that you need to execute all the steps to complete the task and that "
      "infinite resources are available. What is the shortest possible time to " +
      instance.task_name + "? " + kAnswerTagHintTime);

  RenderedPrompt out;
  out.instance_id = instance.instance_id;
  out.representation = Representation::NL;
  out.prompt_text = join_lines(lines);
  out.gold_minutes = gold;
  out.gold_answer_text = gold_display_text(instance, gold);
  return out;
}

RenderedPrompt render_graph(const taskgraph::PlanInstance& instance) {
  taskgraph::validate(instance);
  Rational gold = taskgraph::longest_path_minutes(instance);
  taskgraph::AugmentedGraph g = taskgraph::augment(instance);

  std::string adjacency = "{";
  bool first = true;
  for (int node : listing_order(g)) {
    if (!first) adjacency += ", ";
    first = false;
    adjacency += quoted(node_name(g, node)) + ": [";
    for (size_t i = 0; i < g.successors[node].size(); ++i) {
      if (i) adjacency += ", ";
      adjacency += quoted(node_name(g, g.successors[node][i]));
    }
    adjacency += "]";
  }
  adjacency += "}";

  std::string labels = "{";
  for (const auto& step : instance.steps) {
    if (step.id > 1) labels += ", ";
    labels += quoted(std::to_string(step.id)) + ": " + quoted(step.duration_text);
  }
  labels += "}";

  std::vector<std::string> lines = {
      "You have a graph whose adjacency list representation is as follows:",
      "",
      adjacency,
      "",
      "The graph is a directed graph, and the nodes are labelled as follows (START and END are "
      "special nodes which takes no time to traverse):",
      labels,
      "",
      "Suppose you have to traverse from node 'START' to node 'END', how long does the longest "
      "path take? " +
          std::string(kAnswerTagHintTime),
  };

  RenderedPrompt out;
  out.instance_id = instance.instance_id;
  out.representation = Representation::GRAPH;
  out.prompt_text = join_lines(lines);
  out.gold_minutes = gold;
  out.gold_answer_text = gold_display_text(instance, gold);
  return out;
}

RenderedPrompt render_code(const taskgraph::PlanInstance& instance, std::uint64_t render_seed,
                           const CodeRenderOptions& options) {
  taskgraph::validate(instance);
  Rational gold = taskgraph::longest_path_minutes(instance);
  taskgraph::AugmentedGraph g = taskgraph::augment(instance);

  std::vector<int> alias(g.node_count(), 0);
  if (options.alias_override) {
    std::set<int> seen;
    for (int node = 0; node < g.node_count(); ++node) {
      auto it = options.alias_override->find(node);
      if (it == options.alias_override->end()) {
        throw InvalidInstance(instance.instance_id + ": alias override misses node " +
                              std::to_string(node));
      }
      if (!seen.insert(it->second).second) {
        throw InvalidInstance(instance.instance_id + ": alias override repeats an alias");
      }
      alias[node] = it->second;
    }
  } else {
    std::mt19937_64 rng(render_seed);
    const std::uint64_t range = std::max<std::uint64_t>(900, 2 * g.node_count());
    std::set<int> used;
    for (int node = 0; node < g.node_count(); ++node) {
      int candidate;
      do {
        candidate = 100 + static_cast<int>(rng() % range);
      } while (!used.insert(candidate).second);
      alias[node] = candidate;
    }
  }

  std::vector<std::string> entry_lines;
  for (int node : listing_order(g)) {
    std::string entry = "    " + std::to_string(alias[node]) + ": [";
    for (size_t i = 0; i < g.successors[node].size(); ++i) {
      int v = g.successors[node][i];
      if (i) entry += ", ";
      entry += "(" + std::to_string(alias[v]) + ", " + g.durations[v].to_decimal_string(1) + ")";
    }
    entry += "]";
    entry_lines.push_back(entry);
  }

  std::vector<std::string> lines;
  lines.push_back(
      "Below is a Python function to search for the longest path from a source node to a target "
      "node in a directed acyclic graph (DAG) using the adjacency list representation.");
  lines.push_back("");
  lines.push_back(
      "The function takes a weighted adjacency list (a dictionary mapping each source node i to a "
      "list of (j, w) pairs, where j is a target node and w is the weight of the edge), along "
      "with a source and target node, and returns the longest path length from source to target.");
  lines.push_back("");
  lines.push_back(kLongestPathFunction);
  lines.push_back("");
  lines.push_back("Suppose your inputs are as follows:");
  lines.push_back("adj_list = {");
  for (size_t i = 0; i < entry_lines.size(); ++i) {
    lines.push_back(entry_lines[i] + (i + 1 < entry_lines.size() ? "," : ""));
  }
  lines.push_back("}");
  lines.push_back("source = " + std::to_string(alias[g.start_node()]));
  lines.push_back("target = " + std::to_string(alias[g.end_node()]));
  lines.push_back("");
  lines.push_back(
      "Think step by step. Then, encode the output of the function in <answer></answer> "
      "(e.g., <answer>1</answer>).");

  RenderedPrompt out;
  out.instance_id = instance.instance_id;
  out.representation = Representation::CODE;
  out.prompt_text = join_lines(lines);
  out.gold_minutes = gold;
  out.gold_answer_text = gold.to_decimal_string(1);
  out.render_seed = render_seed;
  return out;
}

RenderedPrompt render(const taskgraph::PlanInstance& instance, Representation representation,
                      std::uint64_t render_seed) {
  switch (representation) {
    case Representation::NL: return render_nl(instance);
    case Representation::GRAPH: return render_graph(instance);
    case Representation::CODE: return render_code(instance, render_seed);
  }
  throw SchemaMismatch("unknown representation");
}

namespace {

struct DictScanner {
  const std::string& text;
  size_t pos;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\n' || text[pos] == '\t')) ++pos;
  }

  char peek() {
    if (pos >= text.size()) throw SchemaMismatch("unexpected end of prompt dict");
    return text[pos];
  }

  void expect(char c) {
    if (peek() != c) {
      throw SchemaMismatch(std::string("expected '") + c + "' in prompt dict, found '" + peek() +
                           "'");
    }
    ++pos;
  }

  std::string quoted_string() {
    expect('\'');
    std::string out;
    while (peek() != '\'') out += text[pos++];
    ++pos;
    return out;
  }
};

int node_id_from_key(const std::string& key) {
  if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos) {
    throw SchemaMismatch("non-numeric node key '" + key + "' in prompt dict");
  }
  return std::stoi(key);
}

}  // namespace

ParsedGraphPrompt parse_graph_prompt(const std::string& prompt_text) {
  const std::string adjacency_anchor = "adjacency list representation is as follows:";
  const std::string label_anchor = "labelled as follows";
  size_t a = prompt_text.find(adjacency_anchor);
  size_t b = prompt_text.find(label_anchor);
  if (a == std::string::npos || b == std::string::npos) {
    throw SchemaMismatch("text is not a GRAPH prompt");
  }

  ParsedGraphPrompt out;

  DictScanner adj{prompt_text, prompt_text.find('{', a)};
  if (adj.pos == std::string::npos) throw SchemaMismatch("GRAPH prompt has no adjacency dict");
  adj.expect('{');
  adj.skip_ws();
  while (adj.peek() != '}') {
    std::string key = adj.quoted_string();
    adj.skip_ws();
    adj.expect(':');
    adj.skip_ws();
    adj.expect('[');
    adj.skip_ws();
    std::vector<std::string> items;
    while (adj.peek() != ']') {
      items.push_back(adj.quoted_string());
      adj.skip_ws();
      if (adj.peek() == ',') {
        ++adj.pos;
        adj.skip_ws();
      }
    }
    ++adj.pos;  // ']'
    if (key != "START" && key != "END") {
      int u = node_id_from_key(key);
      for (const std::string& item : items) {
        if (item == "END") continue;
        out.edges.push_back({u, node_id_from_key(item)});
      }
    }
    adj.skip_ws();
    if (adj.peek() == ',') {
      ++adj.pos;
      adj.skip_ws();
    }
  }

  DictScanner lab{prompt_text, prompt_text.find('{', b)};
  if (lab.pos == std::string::npos) throw SchemaMismatch("GRAPH prompt has no label dict");
  lab.expect('{');
  lab.skip_ws();
  while (lab.peek() != '}') {
    std::string key = lab.quoted_string();
    lab.skip_ws();
    lab.expect(':');
    lab.skip_ws();
    std::string value = lab.quoted_string();
    if (key != "START" && key != "END") {
      out.duration_text_by_step[node_id_from_key(key)] = value;
    }
    lab.skip_ws();
    if (lab.peek() == ',') {
      ++lab.pos;
      lab.skip_ws();
    }
  }

  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

nlohmann::json to_json(const RenderedPrompt& prompt) {
  return nlohmann::json{
      {"instance_id", prompt.instance_id},
      {"representation", to_string(prompt.representation)},
      {"prompt_text", prompt.prompt_text},
      {"gold_answer_text", prompt.gold_answer_text},
      {"gold_minutes", prompt.gold_minutes.to_double()},
      {"render_seed", prompt.render_seed},
  };
}

RenderedPrompt prompt_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw SchemaMismatch("prompt record is not an object");
  for (const char* key :
       {"instance_id", "representation", "prompt_text", "gold_answer_text", "gold_minutes",
        "render_seed"}) {
    if (!record.contains(key)) {
      throw SchemaMismatch(std::string("prompt record missing field '") + key + "'");
    }
  }
  RenderedPrompt out;
  out.instance_id = record["instance_id"].get<std::string>();
  out.representation = representation_from_string(record["representation"].get<std::string>());
  out.prompt_text = record["prompt_text"].get<std::string>();
  out.gold_answer_text = record["gold_answer_text"].get<std::string>();
  out.render_seed = record["render_seed"].get<std::uint64_t>();

  auto exact = timetext::parse_duration(out.gold_answer_text);
  if (!exact) {
    throw SchemaMismatch(out.instance_id + ": gold_answer_text '" + out.gold_answer_text +
                         "' does not parse");
  }
  out.gold_minutes = *exact;
  double stored = record["gold_minutes"].get<double>();
  if (std::abs(stored - out.gold_minutes.to_double()) > 1e-9) {
    throw SchemaMismatch(out.instance_id + ": gold_minutes disagrees with gold_answer_text");
  }
  return out;
}

std::vector<RenderedPrompt> load_prompts(const std::filesystem::path& path) {
  std::vector<RenderedPrompt> out;
  for (const auto& line : read_jsonl(path)) out.push_back(prompt_from_json(line.value));
  return out;
}

void save_prompts(const std::filesystem::path& path, const std::vector<RenderedPrompt>& prompts) {
  std::vector<nlohmann::json> records;
  records.reserve(prompts.size());
  for (const auto& p : prompts) records.push_back(to_json(p));
  write_jsonl(path, records);
}

}  // namespace isoplan::render
