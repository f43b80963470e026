#include "isoplan/taskgraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include "isoplan/errors.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/timetext.hpp"

namespace isoplan::taskgraph {

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split split_from_string(const std::string& text) {
  if (text == "train") return Split::Train;
  if (text == "test") return Split::Test;
  if (text == "unassigned" || text.empty()) return Split::Unassigned;
  throw SchemaMismatch("unknown split value: " + text);
}

const StepNode* PlanInstance::find_step(int id) const {
  if (id < 1 || id > static_cast<int>(steps.size())) return nullptr;
  const StepNode& s = steps[id - 1];
  return s.id == id ? &s : nullptr;
}

int AugmentedGraph::edge_count() const {
  int total = 0;
  for (const auto& adj : successors) total += static_cast<int>(adj.size());
  return total;
}

void validate(const PlanInstance& instance) {
  const int n = static_cast<int>(instance.steps.size());
  if (n == 0) throw InvalidInstance(instance.instance_id + ": plan has no steps");
  for (int i = 0; i < n; ++i) {
    const StepNode& s = instance.steps[i];
    if (s.id != i + 1) {
      throw InvalidInstance(instance.instance_id + ": step ids must be 1..n in order, got id " +
                            std::to_string(s.id) + " at position " + std::to_string(i + 1));
    }
    auto parsed = timetext::parse_duration(s.duration_text);
    if (!parsed) {
      throw InvalidInstance(instance.instance_id + ": step " + std::to_string(s.id) +
                            " has unparseable duration text '" + s.duration_text + "'");
    }
    if (!(*parsed == s.duration_minutes)) {
      throw InvalidInstance(instance.instance_id + ": step " + std::to_string(s.id) +
                            " duration text disagrees with stored minutes");
    }
    if (s.duration_minutes.is_negative()) {
      throw InvalidInstance(instance.instance_id + ": step " + std::to_string(s.id) +
                            " has negative duration");
    }
  }

  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : instance.edges) {
    if (u < 1 || u > n || v < 1 || v > n) {
      throw DanglingEdge(instance.instance_id + ": edge (" + std::to_string(u) + ", " +
                         std::to_string(v) + ") references a missing step");
    }
    if (u == v) {
      throw CyclicGraph(instance.instance_id + ": self-loop on step " + std::to_string(u));
    }
    if (!seen.insert({u, v}).second) {
      throw InvalidInstance(instance.instance_id + ": duplicate edge (" + std::to_string(u) +
                            ", " + std::to_string(v) + ")");
    }
  }

  // Kahn's algorithm over the step graph; leftovers mean a cycle.
  std::vector<int> indeg(n + 1, 0);
  std::vector<std::vector<int>> succ(n + 1);
  for (const auto& [u, v] : instance.edges) {
    succ[u].push_back(v);
    ++indeg[v];
  }
  std::vector<int> queue;
  for (int id = 1; id <= n; ++id) {
    if (indeg[id] == 0) queue.push_back(id);
  }
  int visited = 0;
  while (!queue.empty()) {
    int u = queue.back();
    queue.pop_back();
    ++visited;
    for (int v : succ[u]) {
      if (--indeg[v] == 0) queue.push_back(v);
    }
  }
  if (visited != n) {
    throw CyclicGraph(instance.instance_id + ": precedence constraints contain a cycle");
  }
}

std::vector<std::string> validation_warnings(const PlanInstance& instance) {
  std::vector<std::string> warnings;
  for (const StepNode& s : instance.steps) {
    if (s.duration_minutes.is_zero()) {
      warnings.push_back("step " + std::to_string(s.id) + " has zero duration");
    }
    if (s.description.empty()) {
      warnings.push_back("step " + std::to_string(s.id) + " has an empty description");
    }
  }
  return warnings;
}

AugmentedGraph augment(const PlanInstance& instance) {
  const int n = static_cast<int>(instance.steps.size());
  AugmentedGraph g;
  g.step_count = n;
  g.successors.assign(n + 2, {});
  g.durations.assign(n + 2, Rational(0));
  for (const StepNode& s : instance.steps) g.durations[s.id] = s.duration_minutes;

  std::vector<int> indeg(n + 1, 0);
  std::vector<int> outdeg(n + 1, 0);
  for (const auto& [u, v] : instance.edges) {
    if (u < 1 || u > n || v < 1 || v > n) {
      throw DanglingEdge(instance.instance_id + ": edge references a missing step");
    }
    g.successors[u].push_back(v);
    ++outdeg[u];
    ++indeg[v];
  }
  for (int id = 1; id <= n; ++id) {
    if (indeg[id] == 0) g.successors[0].push_back(id);
    if (outdeg[id] == 0) g.successors[id].push_back(n + 1);
  }
  for (auto& adj : g.successors) std::sort(adj.begin(), adj.end());
  return g;
}

Rational longest_path_minutes(const AugmentedGraph& graph) {
  const int count = graph.node_count();
  std::vector<int> indeg(count, 0);
  for (int u = 0; u < count; ++u) {
    for (int v : graph.successors[u]) ++indeg[v];
  }
  std::vector<int> order;
  order.reserve(count);
  std::vector<int> frontier;
  for (int u = 0; u < count; ++u) {
    if (indeg[u] == 0) frontier.push_back(u);
  }
  while (!frontier.empty()) {
    int u = frontier.back();
    frontier.pop_back();
    order.push_back(u);
    for (int v : graph.successors[u]) {
      if (--indeg[v] == 0) frontier.push_back(v);
    }
  }
  if (static_cast<int>(order.size()) != count) {
    throw CyclicGraph("augmented graph contains a cycle");
  }

  const Rational unreached(-1);
  std::vector<Rational> best(count, unreached);
  best[graph.start_node()] = graph.durations[graph.start_node()];
  for (int u : order) {
    if (best[u] == unreached) continue;
    for (int v : graph.successors[u]) {
      Rational cand = best[u] + graph.durations[v];
      if (best[v] == unreached || cand > best[v]) best[v] = cand;
    }
  }
  if (best[graph.end_node()] == unreached) {
    throw Unreachable("END is not reachable from START");
  }
  return best[graph.end_node()];
}

Rational longest_path_minutes(const PlanInstance& instance) {
  return longest_path_minutes(augment(instance));
}

int complexity(const PlanInstance& instance) {
  AugmentedGraph g = augment(instance);
  return g.node_count() + g.edge_count();
}

namespace {

const char* kVerbs[] = {
    "Prepare", "Inspect", "Assemble", "Clean", "Measure", "Pack",
    "Label",   "Sort",    "Polish",   "Test",  "Organize", "Sketch",
    "Sand",    "Prime",   "Paint",    "Calibrate", "Wire", "Mount",
};

const char* kObjects[] = {
    "the frame",         "the workbench",   "the toolkit",      "the shelving unit",
    "the cabinet doors", "the sample batch", "the fixtures",    "the storage bins",
    "the drawer rails",  "the panel",       "the base plate",   "the hinges",
    "the circuit board", "the housing",     "the brackets",     "the trim pieces",
    "the fasteners",     "the work area",   "the components",   "the enclosure",
};

const char* kTaskNames[] = {
    "assemble the bookshelf", "prepare the workshop",   "renovate the studio",
    "set up the lab bench",   "build the garden planter", "organize the garage",
    "stage the exhibit",      "refurbish the desk",     "install the shelving",
    "prototype the fixture",
};

constexpr int kAttempts = 40;

bool complexity_achievable(int c) { return c == 5 || c >= 7; }

long long max_extras_complexity(long long n) { return n + 4 + n * (n - 1) / 2; }

std::vector<int> candidate_step_counts(int c) {
  std::vector<int> out;
  if (c == 5) out.push_back(1);
  for (int n = 2; n <= 64 && 2 * n + 3 <= c; ++n) {
    if (c <= max_extras_complexity(n) || c == 3 * n + 2) out.push_back(n);
  }
  if (out.empty() && c >= 7) {
    int n = 2;
    while (max_extras_complexity(n) < c) ++n;
    out.push_back(n);
  }
  return out;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

/// Builds a layered DAG over node positions 0..n-1 whose augmented
/// complexity is exactly c. Returns false if the sampled layering cannot
/// reach the target.
bool try_layered_edges(int n, int c, std::mt19937_64& rng, std::vector<std::pair<int, int>>& out) {
  const int target_aug_edges = c - (n + 2);
  int max_layers = std::min(n, 10);
  int layers = 2 + static_cast<int>(rng() % (max_layers - 1));

  // Random composition of n into `layers` positive parts.
  std::vector<int> cuts(n - 1);
  for (int i = 0; i < n - 1; ++i) cuts[i] = i + 1;
  shuffle_vec(cuts, rng);
  cuts.resize(layers - 1);
  std::sort(cuts.begin(), cuts.end());
  std::vector<int> layer_of(n, 0);
  {
    int layer = 0;
    size_t next_cut = 0;
    for (int pos = 0; pos < n; ++pos) {
      while (next_cut < cuts.size() && pos >= cuts[next_cut]) {
        ++layer;
        ++next_cut;
      }
      layer_of[pos] = layer;
    }
  }
  std::vector<std::vector<int>> layer_nodes(layers);
  for (int pos = 0; pos < n; ++pos) layer_nodes[layer_of[pos]].push_back(pos);

  const int sources = static_cast<int>(layer_nodes.front().size());
  const int sinks = static_cast<int>(layer_nodes.back().size());
  const int edge_target = target_aug_edges - sources - sinks;
  if (edge_target < n - sources) return false;

  std::set<std::pair<int, int>> edges;
  // Every node below the first layer draws one parent from the layer above.
  for (int l = 1; l < layers; ++l) {
    for (int node : layer_nodes[l]) {
      const auto& parents = layer_nodes[l - 1];
      edges.insert({parents[rng() % parents.size()], node});
    }
  }
  // Every node above the last layer must reach forward.
  std::vector<int> outdeg(n, 0);
  for (const auto& [u, v] : edges) ++outdeg[u];
  for (int l = 0; l + 1 < layers; ++l) {
    for (int node : layer_nodes[l]) {
      if (outdeg[node] == 0) {
        const auto& children = layer_nodes[l + 1];
        if (edges.insert({node, children[rng() % children.size()]}).second) ++outdeg[node];
      }
    }
  }
  if (static_cast<int>(edges.size()) > edge_target) return false;

  std::vector<std::pair<int, int>> extras;
  for (int u = 0; u < n; ++u) {
    for (int v = 0; v < n; ++v) {
      if (layer_of[u] < layer_of[v] && !edges.count({u, v})) extras.push_back({u, v});
    }
  }
  int need = edge_target - static_cast<int>(edges.size());
  if (need > static_cast<int>(extras.size())) return false;
  shuffle_vec(extras, rng);
  for (int i = 0; i < need; ++i) edges.insert(extras[i]);

  out.assign(edges.begin(), edges.end());
  return true;
}

/// Chain 0 -> 1 -> ... -> n-1 plus forward extras; reaches any complexity in
/// [2n+3, max_extras_complexity(n)].
void chain_with_extras(int n, int c, std::mt19937_64& rng, std::vector<std::pair<int, int>>& out) {
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.insert({i, i + 1});
  int edge_target = c - (n + 2) - 2;
  std::vector<std::pair<int, int>> extras;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 2; v < n; ++v) extras.push_back({u, v});
  }
  shuffle_vec(extras, rng);
  int need = edge_target - static_cast<int>(edges.size());
  for (int i = 0; i < need; ++i) edges.insert(extras[i]);
  out.assign(edges.begin(), edges.end());
}

}  // namespace

std::vector<PlanInstance> generate(const GenerateOptions& options) {
  if (options.count < 0) throw InvalidInstance("generate: negative count");
  if (options.min_complexity > options.max_complexity) {
    throw InfeasibleRange("generate: empty complexity range");
  }

  std::vector<std::string> vocab = options.duration_vocab;
  if (vocab.empty()) {
    vocab = {"5 min",  "10 min", "15 min", "20 min", "25 min",
             "30 min", "45 min", "1 hour", "90 min", "2 hours"};
  }
  std::vector<Rational> vocab_minutes;
  for (const std::string& text : vocab) {
    auto parsed = timetext::parse_duration(text);
    if (!parsed || !(*parsed > Rational(0))) {
      throw InvalidInstance("generate: duration vocabulary entry '" + text +
                            "' is not a positive duration");
    }
    vocab_minutes.push_back(*parsed);
  }

  std::vector<int> feasible;
  for (int c = options.min_complexity; c <= options.max_complexity; ++c) {
    if (complexity_achievable(c)) feasible.push_back(c);
  }
  if (feasible.empty()) {
    throw InfeasibleRange("generate: no achievable complexity in [" +
                          std::to_string(options.min_complexity) + ", " +
                          std::to_string(options.max_complexity) +
                          "] (achievable values are 5 and everything >= 7)");
  }

  const int verb_count = static_cast<int>(std::size(kVerbs));
  const int object_count = static_cast<int>(std::size(kObjects));

  std::vector<PlanInstance> out;
  out.reserve(options.count);
  for (int index = 0; index < options.count; ++index) {
    std::mt19937_64 rng(mix_seed(options.seed, static_cast<std::uint64_t>(index)));
    const int c = feasible[rng() % feasible.size()];
    auto step_counts = candidate_step_counts(c);
    const int n = step_counts[rng() % step_counts.size()];

    std::vector<std::pair<int, int>> pos_edges;
    if (n > 1) {
      bool built = false;
      for (int attempt = 0; attempt < kAttempts && !built; ++attempt) {
        built = try_layered_edges(n, c, rng, pos_edges);
      }
      if (!built) {
        if (2 * n + 3 <= c && c <= max_extras_complexity(n)) {
          chain_with_extras(n, c, rng, pos_edges);
        } else {
          pos_edges.clear();  // c == 3n+2: the edgeless plan
        }
      }
    }

    // Scatter step ids so the id order carries no structural signal.
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i + 1;
    shuffle_vec(perm, rng);

    PlanInstance inst;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "gen-%llu-%05d",
                  static_cast<unsigned long long>(options.seed), index);
    inst.instance_id = idbuf;
    inst.task_name = kTaskNames[rng() % std::size(kTaskNames)];

    std::vector<int> combos(verb_count * object_count);
    for (size_t i = 0; i < combos.size(); ++i) combos[i] = static_cast<int>(i);
    shuffle_vec(combos, rng);

    inst.steps.resize(n);
    for (int id = 1; id <= n; ++id) {
      StepNode& s = inst.steps[id - 1];
      s.id = id;
      int combo = combos[(id - 1) % combos.size()];
      s.description = std::string(kVerbs[combo / object_count]) + " " +
                      kObjects[combo % object_count] + ".";
      size_t pick = rng() % vocab.size();
      s.duration_text = vocab[pick];
      s.duration_minutes = vocab_minutes[pick];
    }

    for (const auto& [u, v] : pos_edges) inst.edges.push_back({perm[u], perm[v]});
    std::sort(inst.edges.begin(), inst.edges.end());

    validate(inst);
    if (complexity(inst) != c) {
      throw InvalidInstance(inst.instance_id + ": generator missed its complexity target");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

nlohmann::json to_json(const PlanInstance& instance) {
  nlohmann::json steps = nlohmann::json::array();
  for (const StepNode& s : instance.steps) {
    steps.push_back({
        {"id", s.id},
        {"description", s.description},
        {"duration_text", s.duration_text},
        {"duration_minutes", s.duration_minutes.to_double()},
    });
  }
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : instance.edges) edges.push_back({u, v});
  nlohmann::json record{
      {"instance_id", instance.instance_id},
      {"task_name", instance.task_name},
      {"steps", std::move(steps)},
      {"edges", std::move(edges)},
      {"complexity", complexity(instance)},
      {"split", to_string(instance.split)},
  };
  if (!instance.meta.is_null()) record["meta"] = instance.meta;
  return record;
}

namespace {

const nlohmann::json& require_field(const nlohmann::json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw SchemaMismatch(std::string("missing field '") + key + "'");
  return *it;
}

}  // namespace

PlanInstance instance_from_json(const nlohmann::json& record) {
  if (!record.is_object()) throw SchemaMismatch("instance record is not an object");
  PlanInstance inst;
  const auto& id = require_field(record, "instance_id");
  const auto& name = require_field(record, "task_name");
  const auto& steps = require_field(record, "steps");
  const auto& edges = require_field(record, "edges");
  if (!id.is_string() || !name.is_string() || !steps.is_array() || !edges.is_array()) {
    throw SchemaMismatch("instance record has wrongly typed fields");
  }
  inst.instance_id = id.get<std::string>();
  inst.task_name = name.get<std::string>();

  for (const auto& step : steps) {
    if (!step.is_object()) throw SchemaMismatch(inst.instance_id + ": step is not an object");
    StepNode s;
    const auto& sid = require_field(step, "id");
    const auto& text = require_field(step, "duration_text");
    if (!sid.is_number_integer() || !text.is_string()) {
      throw SchemaMismatch(inst.instance_id + ": step fields have wrong types");
    }
    s.id = sid.get<int>();
    s.description = step.value("description", std::string());
    s.duration_text = text.get<std::string>();
    auto parsed = timetext::parse_duration(s.duration_text);
    if (!parsed) {
      throw SchemaMismatch(inst.instance_id + ": unparseable duration_text '" + s.duration_text + "'");
    }
    s.duration_minutes = *parsed;
    if (step.contains("duration_minutes")) {
      double stored = step["duration_minutes"].get<double>();
      if (std::abs(stored - s.duration_minutes.to_double()) > 1e-9) {
        throw SchemaMismatch(inst.instance_id + ": duration_minutes disagrees with duration_text");
      }
    }
    inst.steps.push_back(std::move(s));
  }

  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
      throw SchemaMismatch(inst.instance_id + ": edge is not an integer pair");
    }
    inst.edges.push_back({e[0].get<int>(), e[1].get<int>()});
  }

  inst.split = split_from_string(record.value("split", std::string("unassigned")));
  inst.meta = record.value("meta", nlohmann::json());
  if (record.contains("complexity")) {
    int stored = record["complexity"].get<int>();
    int actual = complexity(inst);
    if (stored != actual) {
      throw SchemaMismatch(inst.instance_id + ": stored complexity " + std::to_string(stored) +
                           " disagrees with computed " + std::to_string(actual));
    }
  }
  return inst;
}

std::vector<PlanInstance> load_instances(const std::filesystem::path& path) {
  std::vector<PlanInstance> out;
  for (const auto& line : read_jsonl(path)) {
    PlanInstance inst = instance_from_json(line.value);
    validate(inst);
    out.push_back(std::move(inst));
  }
  return out;
}

void save_instances(const std::filesystem::path& path, const std::vector<PlanInstance>& instances) {
  std::vector<nlohmann::json> records;
  records.reserve(instances.size());
  for (const auto& inst : instances) records.push_back(to_json(inst));
  write_jsonl(path, records);
}

std::string dataset_hash(const std::vector<PlanInstance>& instances) {
  std::uint64_t h = kFnvOffset;
  for (const auto& inst : instances) {
    h = fnv1a64(to_json(inst).dump(), h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

}  // namespace isoplan::taskgraph
