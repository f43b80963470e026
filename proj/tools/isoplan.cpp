#include <cstdio>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isoplan/analogy.hpp"
#include "isoplan/datapipe.hpp"
#include "isoplan/errors.hpp"
#include "isoplan/grade.hpp"
#include "isoplan/harness.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/render.hpp"
#include "isoplan/stats.hpp"
#include "isoplan/taskgraph.hpp"

namespace fs = std::filesystem;
using namespace isoplan;

namespace {

std::vector<std::pair<int, int>> parse_bins(const std::vector<std::string>& specs) {
  std::vector<std::pair<int, int>> bins;
  for (const auto& spec : specs) {
    int lo = 0, hi = 0;
    if (std::sscanf(spec.c_str(), "%d:%d", &lo, &hi) != 2) {
      throw Error("bad bin spec '" + spec + "' (expected lo:hi)");
    }
    bins.emplace_back(lo, hi);
  }
  return bins;
}

int run(int argc, char** argv) {
  CLI::App app{"isoplan: asynchronous-planning dataset, evaluation and analysis toolkit"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate random plan instances");
  taskgraph::GenerateOptions gen_opts;
  std::string gen_out = "instances.jsonl";
  gen->add_option("--count", gen_opts.count, "Number of instances")->default_val(10);
  gen->add_option("--min-complexity", gen_opts.min_complexity)->default_val(5);
  gen->add_option("--max-complexity", gen_opts.max_complexity)->default_val(20);
  gen->add_option("--seed", gen_opts.seed)->default_val(0);
  gen->add_option("--duration", gen_opts.duration_vocab,
                  "Duration vocabulary entry (repeatable)");
  gen->add_option("--out", gen_out, "Output JSONL path");
  gen->callback([&] {
    auto instances = taskgraph::generate(gen_opts);
    taskgraph::save_instances(gen_out, instances);
    std::printf("wrote %zu instances to %s (dataset %s)\n", instances.size(), gen_out.c_str(),
                taskgraph::dataset_hash(instances).c_str());
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Convert external JSONL into validated instances");
  std::string ingest_in, ingest_out = "instances.jsonl", ingest_quarantine,
              ingest_format = "auto";
  bool ingest_dedup = false;
  ingest->add_option("--in", ingest_in, "Input JSONL")->required();
  ingest->add_option("--format", ingest_format, "auto | canonical | asynchow");
  ingest->add_option("--out", ingest_out, "Output JSONL path");
  ingest->add_option("--quarantine", ingest_quarantine, "Where rejected records go");
  ingest->add_flag("--dedup", ingest_dedup, "Drop canonical-form duplicates");
  ingest->callback([&] {
    auto result = datapipe::ingest(ingest_in, datapipe::format_hint_from_string(ingest_format));
    if (ingest_dedup) result.instances = datapipe::dedup(result.instances);
    taskgraph::save_instances(ingest_out, result.instances);
    if (!ingest_quarantine.empty()) {
      datapipe::save_quarantine(ingest_quarantine, result.quarantined);
    }
    std::printf("ingested %zu instances, quarantined %zu\n", result.instances.size(),
                result.quarantined.size());
  });

  // render
  auto* render_cmd = app.add_subcommand("render", "Render instances into prompts");
  std::string render_in, render_out = "prompts.jsonl", render_rep = "NL";
  std::uint64_t render_seed = 0;
  render_cmd->add_option("--in", render_in, "Instances JSONL")->required();
  render_cmd->add_option("--representation", render_rep, "NL | GRAPH | CODE");
  render_cmd->add_option("--seed", render_seed, "Base render seed");
  render_cmd->add_option("--out", render_out, "Output JSONL path");
  render_cmd->callback([&] {
    auto instances = taskgraph::load_instances(render_in);
    auto rep = render::representation_from_string(render_rep);
    std::vector<render::RenderedPrompt> prompts;
    prompts.reserve(instances.size());
    for (const auto& inst : instances) {
      prompts.push_back(
          render::render(inst, rep, mix_seed(render_seed, fnv1a64(inst.instance_id))));
    }
    render::save_prompts(render_out, prompts);
    std::printf("rendered %zu %s prompts to %s\n", prompts.size(), render_rep.c_str(),
                render_out.c_str());
  });

  // split
  auto* split_cmd = app.add_subcommand("split", "Stratified train/test split");
  std::string split_in, split_train = "train.jsonl", split_test = "test.jsonl";
  double split_fraction = 0.2;
  std::uint64_t split_seed = 0;
  split_cmd->add_option("--in", split_in, "Instances JSONL")->required();
  split_cmd->add_option("--test-fraction", split_fraction)->default_val(0.2);
  split_cmd->add_option("--seed", split_seed)->default_val(0);
  split_cmd->add_option("--train", split_train, "Train output path");
  split_cmd->add_option("--test", split_test, "Test output path");
  split_cmd->callback([&] {
    auto instances = taskgraph::load_instances(split_in);
    auto result = datapipe::stratified_split(instances, split_fraction, split_seed);
    taskgraph::save_instances(split_train, result.train);
    taskgraph::save_instances(split_test, result.test);
    std::printf("split %zu instances into %zu train / %zu test\n", instances.size(),
                result.train.size(), result.test.size());
  });

  // curriculum
  auto* curriculum = app.add_subcommand("curriculum", "Build a staged training manifest");
  std::string cur_train, cur_stage1 = "GRAPH", cur_stage2 = "NL", cur_out_dir = "curriculum";
  int cur_budget1 = 1000, cur_budget2 = 0;
  std::uint64_t cur_seed = 0;
  curriculum->add_option("--train", cur_train, "Train instances JSONL")->required();
  curriculum->add_option("--stage1", cur_stage1, "Stage 1 representation");
  curriculum->add_option("--stage2", cur_stage2, "Stage 2 representation");
  curriculum->add_option("--budget1", cur_budget1, "Stage 1 step budget");
  curriculum->add_option("--budget2", cur_budget2, "Stage 2 step budget (0 = single stage)");
  curriculum->add_option("--seed", cur_seed)->default_val(0);
  curriculum->add_option("--out-dir", cur_out_dir, "Manifest + prompt directory");
  curriculum->callback([&] {
    auto train = taskgraph::load_instances(cur_train);
    auto manifest = datapipe::build_curriculum(
        train, render::representation_from_string(cur_stage1),
        render::representation_from_string(cur_stage2), {cur_budget1, cur_budget2}, cur_seed,
        cur_out_dir);
    datapipe::save_manifest(fs::path(cur_out_dir) / "manifest.json", manifest);
    std::printf("curriculum with %zu stage(s) under %s\n", manifest.stages.size(),
                cur_out_dir.c_str());
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Send prompts to a chat-completions endpoint");
  std::string eval_prompts, eval_out = "responses.jsonl", eval_record;
  harness::EndpointConfig endpoint;
  eval_cmd->add_option("--prompts", eval_prompts, "Prompt JSONL")->required();
  eval_cmd->add_option("--base-url", endpoint.base_url,
                       "http://host:port or stub:gold | stub:anti | stub:failfirst")
      ->required();
  eval_cmd->add_option("--model", endpoint.model_name, "Model name sent on the wire");
  eval_cmd->add_option("--api-key-env", endpoint.api_key_env, "Env var holding the key");
  eval_cmd->add_option("--temperature", endpoint.temperature)->default_val(0.0);
  eval_cmd->add_option("--max-tokens", endpoint.max_new_tokens)->default_val(6000);
  eval_cmd->add_option("--max-parallel", endpoint.max_parallel)->default_val(4);
  eval_cmd->add_option("--retry-budget", endpoint.retry_budget)->default_val(3);
  eval_cmd->add_option("--backoff-ms", endpoint.retry_backoff_ms)->default_val(100);
  eval_cmd->add_option("--timeout-sec", endpoint.timeout_sec)->default_val(120);
  eval_cmd->add_option("--out", eval_out, "Response JSONL (appended to, then re-sorted)");
  eval_cmd->add_option("--run-record", eval_record, "Where the run record JSON goes");
  eval_cmd->callback([&] {
    auto prompts = render::load_prompts(eval_prompts);
    harness::RunRecord record = harness::eval_run(prompts, endpoint, eval_out);
    if (!eval_record.empty()) harness::save_run_record(eval_record, record);
    std::printf("sent %lld, ok %lld, retried %lld, failed %lld, skipped %lld\n",
                record.counts.sent, record.counts.ok, record.counts.retried,
                record.counts.failed, record.counts.skipped);
  });

  // grade
  auto* grade_cmd = app.add_subcommand("grade", "Grade responses against prompt gold answers");
  std::string grade_responses, grade_prompts, grade_out = "grades.jsonl";
  bool grade_strict = false;
  grade_cmd->add_option("--responses", grade_responses, "Response JSONL")->required();
  grade_cmd->add_option("--prompts", grade_prompts, "Prompt JSONL")->required();
  grade_cmd->add_option("--out", grade_out, "Grade JSONL path");
  grade_cmd->add_flag("--strict-text", grade_strict, "Require byte-equal answer text");
  grade_cmd->callback([&] {
    auto responses = grade::load_responses(grade_responses);
    auto prompts = render::load_prompts(grade_prompts);
    grade::GradeOptions options;
    options.strict_text = grade_strict;
    auto grades = grade::grade_all(responses, prompts, options);
    grade::save_grades(grade_out, grades);
    long long correct = 0;
    for (const auto& g : grades) correct += g.correct ? 1 : 0;
    std::printf("graded %zu responses, %lld correct\n", grades.size(), correct);
  });

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Pairwise analogical-strength matrix");
  std::string an_rows, an_cols, an_mode = "JACCARD", an_out = "similarity.csv", an_cache_dir;
  analogy::StrengthOptions strength;
  int an_threads = 0;
  analyze->add_option("--rows", an_rows, "Row instances JSONL (e.g. test)")->required();
  analyze->add_option("--cols", an_cols, "Column instances JSONL (e.g. train)")->required();
  analyze->add_option("--mode", an_mode, "JACCARD | WL");
  analyze->add_option("--alpha", strength.alpha)->default_val(0.4);
  analyze->add_option("--wl-iterations", strength.wl.iterations)->default_val(3);
  analyze->add_option("--threads", an_threads, "Worker threads (0 = serial)");
  analyze->add_option("--out", an_out, "CSV output path");
  analyze->add_option("--cache-dir", an_cache_dir, "Binary cache directory");
  analyze->callback([&] {
    strength.mode = analogy::mode_from_string(an_mode);
    auto rows = taskgraph::load_instances(an_rows);
    auto cols = taskgraph::load_instances(an_cols);
    std::optional<analogy::SimilarityMatrix> matrix;
    fs::path cache_path;
    if (!an_cache_dir.empty()) {
      auto combined = rows;
      combined.insert(combined.end(), cols.begin(), cols.end());
      cache_path = fs::path(an_cache_dir) /
                   analogy::cache_name(taskgraph::dataset_hash(combined), strength);
      matrix = analogy::load_matrix_cache(cache_path);
    }
    if (!matrix) {
      matrix = analogy::similarity_matrix(rows, cols, strength, an_threads);
      if (!cache_path.empty()) analogy::save_matrix_cache(cache_path, *matrix);
    }
    analogy::save_matrix_csv(an_out, *matrix);
    std::printf("matrix %zu x %zu written to %s\n", matrix->row_ids.size(),
                matrix->col_ids.size(), an_out.c_str());
  });

  // report
  auto* report = app.add_subcommand("report", "Hypothesis sweep and complexity tables");
  std::string rep_grades, rep_test, rep_train, rep_train_grades, rep_out_dir = "reports",
              rep_mode = "JACCARD";
  std::vector<std::string> rep_bins = {"5:10", "10:15", "15:25"};
  analogy::StrengthOptions rep_strength;
  double rep_significance = 0.05;
  report->add_option("--grades", rep_grades, "Test-split grade JSONL")->required();
  report->add_option("--test", rep_test, "Test instances JSONL")->required();
  report->add_option("--train", rep_train, "Train instances JSONL (enables the sweep)");
  report->add_option("--train-grades", rep_train_grades, "Train-split grade JSONL");
  report->add_option("--mode", rep_mode, "JACCARD | WL");
  report->add_option("--alpha", rep_strength.alpha)->default_val(0.4);
  report->add_option("--wl-iterations", rep_strength.wl.iterations)->default_val(3);
  report->add_option("--significance", rep_significance)->default_val(0.05);
  report->add_option("--bin", rep_bins, "Complexity bin lo:hi (repeatable)");
  report->add_option("--out-dir", rep_out_dir, "Report directory");
  report->callback([&] {
    auto grades = grade::load_grades(rep_grades);
    auto test = taskgraph::load_instances(rep_test);
    fs::create_directories(rep_out_dir);
    auto bins = stats::accuracy_by_complexity(grades, test, parse_bins(rep_bins));
    write_text_file(fs::path(rep_out_dir) / "complexity.csv", stats::complexity_table_csv(bins));
    write_text_file(fs::path(rep_out_dir) / "complexity.md",
                    "```\n" + stats::complexity_table_text(bins) + "```\n");
    if (!rep_train.empty() && !rep_train_grades.empty()) {
      rep_strength.mode = analogy::mode_from_string(rep_mode);
      auto train = taskgraph::load_instances(rep_train);
      auto train_grades = grade::load_grades(rep_train_grades);
      std::set<std::string> learned;
      for (const auto& g : train_grades) {
        if (g.correct) learned.insert(g.instance_id);
      }
      auto sim = analogy::similarity_matrix(test, train, rep_strength);
      std::vector<std::string> ids;
      for (const auto& inst : test) ids.push_back(inst.instance_id);
      stats::OutcomeVector outcomes;
      outcomes.setting_label = "report";
      std::set<std::string> correct_ids;
      for (const auto& g : grades) {
        if (g.correct) correct_ids.insert(g.instance_id);
      }
      for (const auto& id : ids) {
        outcomes.ids.push_back(id);
        outcomes.correct.push_back(correct_ids.count(id) > 0);
      }
      auto sweep = stats::hypothesis_sweep(outcomes, learned, sim, rep_significance);
      write_text_file(fs::path(rep_out_dir) / "hypothesis.csv",
                      stats::hypothesis_report_csv(sweep));
      write_text_file(fs::path(rep_out_dir) / "hypothesis.md",
                      "```\n" + stats::hypothesis_report_text(sweep) + "```\n");
    }
    std::printf("reports written to %s\n", rep_out_dir.c_str());
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Full gen/split/render/eval/grade/report run");
  std::string pipe_config;
  pipe->add_option("--config", pipe_config, "Pipeline config JSON")->required();
  pipe->callback([&] {
    auto config = harness::load_pipeline_config(pipe_config);
    harness::run_pipeline(config);
    std::printf("pipeline finished under %s\n", config.out_dir.string().c_str());
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
