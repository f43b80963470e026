#include "isoplan/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "httplib.h"
#include "isoplan/errors.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/jsonl.hpp"
#include "nlohmann/json.hpp"

namespace isoplan::harness {

namespace {

using json = nlohmann::json;

std::string iso_utc_now() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::string response_key(const std::string& instance_id, const std::string& representation) {
  return instance_id + '\x1f' + representation;
}

std::string prompt_manifest_hash(const std::vector<render::RenderedPrompt>& prompts) {
  std::uint64_t h = kFnvOffset;
  for (const auto& p : prompts) {
    h = fnv1a64(p.instance_id, h);
    h = fnv1a64(render::to_string(p.representation), h);
    h = fnv1a64(p.prompt_text, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

enum class AttemptOutcome { Ok, HttpFailure, TransportFailure };

struct AttemptResult {
  AttemptOutcome outcome = AttemptOutcome::TransportFailure;
  std::string content;
  std::string detail;
};

AttemptResult attempt_once(httplib::Client& client, const EndpointConfig& cfg,
                           const std::string& prompt_text) {
  json body = {
      {"model", cfg.model_name},
      {"messages", json::array({json{{"role", "user"}, {"content", prompt_text}}})},
      {"temperature", cfg.temperature},
      {"max_tokens", cfg.max_new_tokens},
  };
  httplib::Result res = client.Post("/v1/chat/completions", body.dump(), "application/json");
  AttemptResult out;
  if (!res) {
    out.outcome = AttemptOutcome::TransportFailure;
    out.detail = httplib::to_string(res.error());
    return out;
  }
  if (res->status != 200) {
    out.outcome = AttemptOutcome::HttpFailure;
    out.detail = "http status " + std::to_string(res->status);
    return out;
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    out.outcome = AttemptOutcome::HttpFailure;
    out.detail = "response body is not a chat completion";
    return out;
  }
  const json& message = parsed["choices"][0];
  if (!message.contains("message") || !message["message"].contains("content") ||
      !message["message"]["content"].is_string()) {
    out.outcome = AttemptOutcome::HttpFailure;
    out.detail = "chat completion carries no message content";
    return out;
  }
  out.outcome = AttemptOutcome::Ok;
  out.content = message["message"]["content"].get<std::string>();
  return out;
}

}  // namespace

nlohmann::json to_json(const RunRecord& record) {
  return json{
      {"run_id", record.run_id},
      {"manifest_hash", record.manifest_hash},
      {"endpoint_fingerprint", record.endpoint_fingerprint},
      {"started_at", record.started_at},
      {"finished_at", record.finished_at},
      {"counts",
       json{{"sent", record.counts.sent},
            {"ok", record.counts.ok},
            {"retried", record.counts.retried},
            {"failed", record.counts.failed},
            {"skipped", record.counts.skipped}}},
  };
}

void save_run_record(const std::filesystem::path& path, const RunRecord& record) {
  write_text_file(path, to_json(record).dump(2) + "\n");
}

RunRecord eval_run(const std::vector<render::RenderedPrompt>& prompts, const EndpointConfig& cfg,
                   const std::filesystem::path& out_path) {
  RunRecord record;
  record.manifest_hash = prompt_manifest_hash(prompts);
  record.started_at = iso_utc_now();

  std::string base_url = cfg.base_url;
  if (const char* env = std::getenv("ISOPLAN_BASE_URL"); env != nullptr && *env != '\0') {
    base_url = env;
  }
  std::unique_ptr<StubServer> stub;
  const std::string stub_prefix = "stub:";
  if (base_url.rfind(stub_prefix, 0) == 0) {
    stub = std::make_unique<StubServer>(stub_mode_from_string(base_url.substr(stub_prefix.size())));
    base_url = stub->base_url();
  }
  record.endpoint_fingerprint = cfg.model_name + "@" + base_url;
  record.run_id = hex64(mix_seed(
      fnv1a64(record.manifest_hash + record.endpoint_fingerprint + record.started_at),
      static_cast<std::uint64_t>(
          std::chrono::steady_clock::now().time_since_epoch().count())));

  std::set<std::string> done;
  if (std::filesystem::exists(out_path)) {
    for (const auto& existing : grade::load_responses(out_path)) {
      done.insert(response_key(existing.instance_id, render::to_string(existing.representation)));
    }
  }
  std::vector<const render::RenderedPrompt*> pending;
  for (const auto& p : prompts) {
    if (done.count(response_key(p.instance_id, render::to_string(p.representation))) > 0) {
      ++record.counts.skipped;
    } else {
      pending.push_back(&p);
    }
  }

  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  std::ofstream append(out_path, std::ios::app | std::ios::binary);
  if (!append) throw Error("cannot open for append: " + out_path.string());

  std::string api_key;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key != nullptr) api_key = key;

  std::mutex io_mu;
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> fatal{false};
  std::string fatal_detail;
  std::atomic<long long> ok{0}, failed{0}, retried{0};

  auto worker = [&]() {
    httplib::Client client(base_url);
    client.set_connection_timeout(cfg.timeout_sec);
    client.set_read_timeout(cfg.timeout_sec);
    client.set_write_timeout(cfg.timeout_sec);
    if (!api_key.empty()) {
      client.set_default_headers({{"Authorization", "Bearer " + api_key}});
    }
    while (!fatal.load()) {
      std::size_t index = cursor.fetch_add(1);
      if (index >= pending.size()) return;
      const render::RenderedPrompt& prompt = *pending[index];
      AttemptResult last;
      bool answered = false;
      for (int attempt = 0; attempt <= cfg.retry_budget; ++attempt) {
        if (attempt > 0) {
          retried.fetch_add(1);
          long long delay = static_cast<long long>(cfg.retry_backoff_ms)
                            << std::min(attempt - 1, 10);
          std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        last = attempt_once(client, cfg, prompt.prompt_text);
        if (last.outcome == AttemptOutcome::Ok) {
          answered = true;
          break;
        }
        if (fatal.load()) return;
      }
      if (answered) {
        grade::ResponseRecord response;
        response.instance_id = prompt.instance_id;
        response.representation = prompt.representation;
        response.model = cfg.model_name;
        response.response_text = last.content;
        std::lock_guard<std::mutex> lock(io_mu);
        append << grade::to_json(response).dump() << '\n';
        append.flush();
        ok.fetch_add(1);
      } else if (last.outcome == AttemptOutcome::TransportFailure) {
        bool expected = false;
        if (fatal.compare_exchange_strong(expected, true)) {
          std::lock_guard<std::mutex> lock(io_mu);
          fatal_detail = last.detail;
        }
        return;
      } else {
        failed.fetch_add(1);
      }
    }
  };

  std::size_t workers = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.max_parallel));
  workers = std::min(workers, std::max<std::size_t>(1, pending.size()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  append.close();

  // Deterministic final layout regardless of completion order.
  auto all = grade::load_responses(out_path);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::pair(a.instance_id, render::to_string(a.representation)) <
           std::pair(b.instance_id, render::to_string(b.representation));
  });
  grade::save_responses(out_path, all);

  if (fatal.load()) {
    throw EndpointUnreachable("endpoint " + record.endpoint_fingerprint +
                              " unreachable after retries: " + fatal_detail);
  }

  record.counts.ok = ok.load();
  record.counts.failed = failed.load();
  record.counts.retried = retried.load();
  record.counts.sent = record.counts.ok + record.counts.failed;
  record.finished_at = iso_utc_now();
  return record;
}

}  // namespace isoplan::harness
