#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isoplan/analogy.hpp"
#include "isoplan/grade.hpp"
#include "isoplan/render.hpp"
#include "isoplan/taskgraph.hpp"

namespace isoplan::harness {

struct EndpointConfig {
  std::string label = "endpoint";
  std::string base_url;  // "http://host:port" or "stub:gold" | "stub:anti" | "stub:failfirst"
  std::string api_key_env = "ISOPLAN_API_KEY";  // env var NAME, never the secret itself
  std::string model_name = "stub";
  double temperature = 0.0;
  int max_new_tokens = 6000;
  int max_parallel = 4;
  int retry_budget = 3;
  int retry_backoff_ms = 100;
  int timeout_sec = 120;
  std::string train_representation;  // grid row annotation; may be empty
};

struct RunCounts {
  long long sent = 0;
  long long ok = 0;
  long long retried = 0;
  long long failed = 0;
  long long skipped = 0;  // already answered before this run
};

struct RunRecord {
  std::string run_id;
  std::string manifest_hash;
  std::string endpoint_fingerprint;  // model@base_url; no secrets
  std::string started_at;            // ISO-8601 UTC
  std::string finished_at;
  RunCounts counts;
};

nlohmann::json to_json(const RunRecord& record);
void save_run_record(const std::filesystem::path& path, const RunRecord& record);

enum class StubMode { Gold, AntiGold, FailFirst };

StubMode stub_mode_from_string(const std::string& text);

/// Solves a rendered prompt of any representation back to exact minutes by
/// re-parsing the task out of the text.
Rational solve_prompt(const std::string& prompt_text);

/// The response body a stub endpoint produces for a prompt: gold answers in
/// Gold/FailFirst modes, off-by-one-minute answers in AntiGold mode.
std::string stub_answer(const std::string& prompt_text, StubMode mode);

/// Minimal in-process chat-completions server used by tests and the
/// offline pipeline ("stub:" base urls).
class StubServer {
 public:
  explicit StubServer(StubMode mode);
  ~StubServer();
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  int port() const;
  std::string base_url() const;
  long long total_requests() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Batch evaluation: one single-turn chat request per prompt, bounded
/// parallelism, exponential-backoff retries, resumable on rerun (prompts
/// whose (instance_id, representation) already appear in out_path are
/// skipped). The response file is re-sorted deterministically at the end.
/// Throws EndpointUnreachable when transport-level failures exhaust the
/// retry budget; HTTP-level failures are counted and skipped instead.
RunRecord eval_run(const std::vector<render::RenderedPrompt>& prompts, const EndpointConfig& cfg,
                   const std::filesystem::path& out_path);

struct AnalysisConfig {
  analogy::Mode mode = analogy::Mode::Jaccard;
  double alpha = 0.4;
  int wl_iterations = 3;
  double significance_level = 0.05;
  std::vector<std::pair<int, int>> complexity_bins = {{5, 10}, {10, 15}, {15, 25}};
};

struct DatasetConfig {
  std::optional<taskgraph::GenerateOptions> generate;
  std::optional<std::string> instances_path;
  std::string ingest_format = "auto";
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  DatasetConfig dataset;
  double test_fraction = 0.2;
  std::vector<render::Representation> representations;
  std::vector<EndpointConfig> endpoints;
  std::optional<std::string> baseline_label;
  AnalysisConfig analysis;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// gen/ingest -> dedup -> split -> render -> eval -> grade -> reports.
/// Reports carry no timestamps; rerunning over cached responses reproduces
/// them byte for byte.
void run_pipeline(const PipelineConfig& config);

}  // namespace isoplan::harness
