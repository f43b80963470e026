#include "isoplan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstring>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "isoplan/errors.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/timetext.hpp"
#include "nlohmann/json.hpp"

namespace isoplan::harness {

namespace {

using json = nlohmann::json;

Rational longest_path_from_parts(int step_count, const std::map<int, std::string>& duration_texts,
                                 std::vector<std::pair<int, int>> edges) {
  taskgraph::PlanInstance inst;
  inst.instance_id = "reparsed";
  inst.task_name = "finish the reparsed task";
  for (int id = 1; id <= step_count; ++id) {
    auto it = duration_texts.find(id);
    if (it == duration_texts.end()) {
      throw SchemaMismatch("prompt names step " + std::to_string(id) + " but never times it");
    }
    auto minutes = timetext::parse_duration(it->second);
    if (!minutes) throw UnparseableTime("bad duration in prompt: " + it->second);
    taskgraph::StepNode step;
    step.id = id;
    step.description = "Reparsed step.";
    step.duration_text = it->second;
    step.duration_minutes = *minutes;
    inst.steps.push_back(std::move(step));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  inst.edges = std::move(edges);
  taskgraph::validate(inst);
  return taskgraph::longest_path_minutes(inst);
}

int read_int_at(const std::string& text, std::size_t pos, std::size_t* end_out) {
  std::size_t end = pos;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
  if (end == pos) throw SchemaMismatch("expected a number in prompt text");
  if (end_out) *end_out = end;
  return std::stoi(text.substr(pos, end - pos));
}

Rational solve_nl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::map<int, std::string> duration_texts;
  std::vector<std::pair<int, int>> edges;
  int max_id = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("Step ", 0) != 0) continue;
    std::size_t after = 0;
    int first = read_int_at(line, 5, &after);
    max_id = std::max(max_id, first);
    if (after < line.size() && line[after] == '.') {
      std::size_t open = line.rfind('(');
      std::size_t close = line.rfind(')');
      if (open == std::string::npos || close == std::string::npos || close < open) {
        throw SchemaMismatch("step line carries no duration: " + line);
      }
      duration_texts[first] = line.substr(open + 1, close - open - 1);
    } else {
      const std::string marker = "must precede step ";
      std::size_t at = line.find(marker, after);
      if (at == std::string::npos) continue;
      int second = read_int_at(line, at + marker.size(), nullptr);
      edges.emplace_back(first, second);
      max_id = std::max(max_id, second);
    }
  }
  if (duration_texts.empty()) throw SchemaMismatch("no step lines found in prompt");
  return longest_path_from_parts(max_id, duration_texts, std::move(edges));
}

Rational solve_graph(const std::string& text) {
  render::ParsedGraphPrompt parsed = render::parse_graph_prompt(text);
  int max_id = 0;
  for (const auto& [id, unused] : parsed.duration_text_by_step) max_id = std::max(max_id, id);
  for (const auto& [u, v] : parsed.edges) max_id = std::max(max_id, std::max(u, v));
  return longest_path_from_parts(max_id, parsed.duration_text_by_step, parsed.edges);
}

struct Scanner {
  const std::string& text;
  std::size_t i;

  void skip_ws() {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  }
  bool eat(char c) {
    skip_ws();
    if (i < text.size() && text[i] == c) {
      ++i;
      return true;
    }
    return false;
  }
  long long integer() {
    skip_ws();
    std::size_t begin = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i == begin) throw SchemaMismatch("expected an integer in adjacency literal");
    return std::stoll(text.substr(begin, i - begin));
  }
  Rational number() {
    skip_ws();
    std::size_t begin = i;
    while (i < text.size() &&
           (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.')) {
      ++i;
    }
    auto parsed = Rational::parse_decimal(text.substr(begin, i - begin));
    if (!parsed) throw SchemaMismatch("bad edge weight in adjacency literal");
    return *parsed;
  }
};

Rational solve_code(const std::string& text) {
  const std::string anchor = "adj_list = {";
  std::size_t start = text.find(anchor);
  if (start == std::string::npos) throw SchemaMismatch("no adjacency literal in prompt");

  std::map<int, std::vector<std::pair<int, Rational>>> adj;
  std::set<int> nodes;
  Scanner sc{text, start + anchor.size()};
  while (true) {
    if (sc.eat('}')) break;
    int from = static_cast<int>(sc.integer());
    nodes.insert(from);
    if (!sc.eat(':')) throw SchemaMismatch("expected ':' in adjacency literal");
    if (!sc.eat('[')) throw SchemaMismatch("expected '[' in adjacency literal");
    auto& out = adj[from];
    while (true) {
      if (sc.eat(']')) break;
      if (!sc.eat('(')) throw SchemaMismatch("expected '(' in adjacency literal");
      int to = static_cast<int>(sc.integer());
      if (!sc.eat(',')) throw SchemaMismatch("expected ',' in adjacency tuple");
      Rational weight = sc.number();
      if (!sc.eat(')')) throw SchemaMismatch("expected ')' in adjacency tuple");
      out.emplace_back(to, weight);
      nodes.insert(to);
      sc.eat(',');
    }
    sc.eat(',');
  }

  auto named_int = [&](const char* name) {
    std::size_t pos = text.find(name, start);
    if (pos == std::string::npos) {
      throw SchemaMismatch(std::string("prompt lacks '") + name + "'");
    }
    return read_int_at(text, pos + std::strlen(name), nullptr);
  };
  int source = named_int("source = ");
  int target = named_int("target = ");

  std::map<int, int> indegree;
  for (int node : nodes) indegree[node] = 0;
  for (const auto& [from, out] : adj) {
    (void)from;
    for (const auto& [to, weight] : out) {
      (void)weight;
      ++indegree[to];
    }
  }
  std::vector<int> queue;
  for (const auto& [node, deg] : indegree) {
    if (deg == 0) queue.push_back(node);
  }
  std::map<int, Rational> dist;
  dist[source] = Rational(0);
  std::size_t processed = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    int u = queue[head];
    ++processed;
    auto du = dist.find(u);
    auto out = adj.find(u);
    if (out != adj.end()) {
      for (const auto& [v, w] : out->second) {
        if (du != dist.end()) {
          Rational candidate = du->second + w;
          auto dv = dist.find(v);
          if (dv == dist.end() || dv->second < candidate) dist[v] = candidate;
        }
        if (--indegree[v] == 0) queue.push_back(v);
      }
    }
  }
  if (processed != nodes.size()) throw CyclicGraph("adjacency literal contains a cycle");
  auto dt = dist.find(target);
  if (dt == dist.end()) throw Unreachable("target is not reachable from source");
  return dt->second;
}

}  // namespace

StubMode stub_mode_from_string(const std::string& text) {
  if (text == "gold") return StubMode::Gold;
  if (text == "anti") return StubMode::AntiGold;
  if (text == "failfirst" || text == "flaky") return StubMode::FailFirst;
  throw Error("unknown stub mode: " + text + " (expected gold, anti, or failfirst)");
}

Rational solve_prompt(const std::string& prompt_text) {
  if (prompt_text.find("adj_list = {") != std::string::npos) return solve_code(prompt_text);
  if (prompt_text.find("adjacency list representation is as follows:") != std::string::npos) {
    return solve_graph(prompt_text);
  }
  if (prompt_text.find("here are the steps and the times needed") != std::string::npos) {
    return solve_nl(prompt_text);
  }
  throw SchemaMismatch("prompt text matches no known representation");
}

std::string stub_answer(const std::string& prompt_text, StubMode mode) {
  Rational minutes = solve_prompt(prompt_text);
  if (mode == StubMode::AntiGold) minutes = minutes + Rational(1);
  bool code_style = prompt_text.find("adj_list = {") != std::string::npos;
  std::string answer =
      code_style ? minutes.to_decimal_string(1) : minutes.to_decimal_string() + " min";
  return "Walking the dependency layers front to back, the slowest chain sets the finish "
         "time. <answer>" +
         answer + "</answer>";
}

struct StubServer::Impl {
  StubMode mode = StubMode::Gold;
  httplib::Server server;
  std::thread worker;
  int port = 0;
  std::atomic<long long> requests{0};
  std::mutex attempts_mu;
  std::map<std::uint64_t, int> attempts;
};

StubServer::StubServer(StubMode mode) : impl_(std::make_unique<Impl>()) {
  impl_->mode = mode;
  Impl* impl = impl_.get();
  impl->server.Post("/v1/chat/completions",
                    [impl](const httplib::Request& req, httplib::Response& res) {
                      impl->requests.fetch_add(1);
                      try {
                        json body = json::parse(req.body);
                        std::string prompt =
                            body.at("messages").at(0).at("content").get<std::string>();
                        if (impl->mode == StubMode::FailFirst) {
                          std::uint64_t key = fnv1a64(prompt);
                          std::lock_guard<std::mutex> lock(impl->attempts_mu);
                          if (++impl->attempts[key] == 1) {
                            res.status = 503;
                            res.set_content("{\"error\":\"warming up\"}", "application/json");
                            return;
                          }
                        }
                        json out = {
                            {"model", "stub"},
                            {"choices",
                             json::array({json{{"message",
                                                json{{"role", "assistant"},
                                                     {"content", stub_answer(prompt, impl->mode)}}}}})},
                        };
                        res.status = 200;
                        res.set_content(out.dump(), "application/json");
                      } catch (const std::exception& e) {
                        res.status = 400;
                        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
                      }
                    });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw EndpointUnreachable("stub server could not bind a local port");
  impl_->worker = std::thread([impl] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StubServer::~StubServer() {
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

int StubServer::port() const { return impl_->port; }

std::string StubServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

long long StubServer::total_requests() const { return impl_->requests.load(); }

}  // namespace isoplan::harness
