#include "isoplan/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "isoplan/datapipe.hpp"
#include "isoplan/errors.hpp"
#include "isoplan/hash.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/stats.hpp"
#include "nlohmann/json.hpp"

namespace isoplan::harness {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string fmt(const char* spec, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, value);
  return buf;
}

EndpointConfig endpoint_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("label") || !doc.contains("base_url")) {
    throw SchemaMismatch("endpoint entries need at least label and base_url");
  }
  EndpointConfig cfg;
  cfg.label = doc.at("label").get<std::string>();
  cfg.base_url = doc.at("base_url").get<std::string>();
  cfg.api_key_env = doc.value("api_key_env", cfg.api_key_env);
  cfg.model_name = doc.value("model", doc.value("model_name", cfg.model_name));
  cfg.temperature = doc.value("temperature", cfg.temperature);
  cfg.max_new_tokens = doc.value("max_new_tokens", cfg.max_new_tokens);
  cfg.max_parallel = doc.value("max_parallel", cfg.max_parallel);
  cfg.retry_budget = doc.value("retry_budget", cfg.retry_budget);
  cfg.retry_backoff_ms = doc.value("retry_backoff_ms", cfg.retry_backoff_ms);
  cfg.timeout_sec = doc.value("timeout_sec", cfg.timeout_sec);
  cfg.train_representation = doc.value("train_representation", std::string());
  if (cfg.max_parallel < 1) throw SchemaMismatch("max_parallel must be >= 1");
  if (cfg.retry_budget < 0) throw SchemaMismatch("retry_budget must be >= 0");
  if (!cfg.train_representation.empty()) {
    render::representation_from_string(cfg.train_representation);  // validates
  }
  return cfg;
}

std::vector<std::pair<int, int>> bins_from_json(const json& doc) {
  std::vector<std::pair<int, int>> bins;
  for (const auto& entry : doc) {
    if (!entry.is_array() || entry.size() != 2) {
      throw SchemaMismatch("complexity_bins entries must be [lo, hi] pairs");
    }
    bins.emplace_back(entry[0].get<int>(), entry[1].get<int>());
  }
  if (bins.empty()) throw SchemaMismatch("complexity_bins must not be empty");
  return bins;
}

/// Correctness over a fixed id universe; instances with no graded response
/// count as incorrect so paired tests stay aligned.
stats::OutcomeVector outcomes_over(const std::vector<grade::GradeRecord>& grades,
                                   const std::vector<std::string>& ids,
                                   const std::string& label) {
  std::map<std::string, bool> by_id;
  for (const auto& g : grades) {
    auto [it, inserted] = by_id.emplace(g.instance_id, g.correct);
    if (!inserted) it->second = it->second || g.correct;
  }
  stats::OutcomeVector out;
  out.setting_label = label;
  for (const auto& id : ids) {
    out.ids.push_back(id);
    auto it = by_id.find(id);
    out.correct.push_back(it != by_id.end() && it->second);
  }
  return out;
}

struct GridCell {
  double accuracy = 0.0;
  std::string marker;  // "+", "-", "=" or ""
  std::optional<stats::McNemarResult> vs_baseline;
};

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  json doc = json::parse(read_text_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw SchemaMismatch(path.string() + ": config is not a JSON object");
  }
  PipelineConfig cfg;
  cfg.seed = doc.value("seed", std::uint64_t{0});
  if (!doc.contains("out_dir")) throw SchemaMismatch("config needs out_dir");
  cfg.out_dir = doc.at("out_dir").get<std::string>();

  if (!doc.contains("dataset") || !doc.at("dataset").is_object()) {
    throw SchemaMismatch("config needs a dataset object");
  }
  const json& dataset = doc.at("dataset");
  if (dataset.contains("generate")) {
    const json& gen = dataset.at("generate");
    taskgraph::GenerateOptions opts;
    opts.count = gen.value("count", 1);
    if (gen.contains("complexity")) {
      const json& range = gen.at("complexity");
      if (!range.is_array() || range.size() != 2) {
        throw SchemaMismatch("generate.complexity must be [lo, hi]");
      }
      opts.min_complexity = range[0].get<int>();
      opts.max_complexity = range[1].get<int>();
    } else {
      opts.min_complexity = gen.value("min_complexity", opts.min_complexity);
      opts.max_complexity = gen.value("max_complexity", opts.max_complexity);
    }
    if (gen.contains("duration_vocab")) {
      opts.duration_vocab = gen.at("duration_vocab").get<std::vector<std::string>>();
    }
    opts.seed = gen.value("seed", cfg.seed);
    cfg.dataset.generate = opts;
  } else if (dataset.contains("instances")) {
    cfg.dataset.instances_path = dataset.at("instances").get<std::string>();
    cfg.dataset.ingest_format = dataset.value("format", std::string("auto"));
  } else {
    throw SchemaMismatch("dataset needs either generate options or an instances path");
  }

  cfg.test_fraction = doc.value("test_fraction", 0.2);

  std::vector<std::string> reps =
      doc.value("representations", std::vector<std::string>{"NL", "GRAPH", "CODE"});
  if (reps.empty()) throw SchemaMismatch("representations must not be empty");
  for (const auto& r : reps) {
    cfg.representations.push_back(render::representation_from_string(r));
  }

  if (!doc.contains("endpoints") || !doc.at("endpoints").is_array() ||
      doc.at("endpoints").empty()) {
    throw SchemaMismatch("config needs a non-empty endpoints array");
  }
  std::set<std::string> labels;
  for (const auto& entry : doc.at("endpoints")) {
    EndpointConfig endpoint = endpoint_from_json(entry);
    if (!labels.insert(endpoint.label).second) {
      throw SchemaMismatch("duplicate endpoint label: " + endpoint.label);
    }
    cfg.endpoints.push_back(std::move(endpoint));
  }
  if (doc.contains("baseline")) {
    std::string baseline = doc.at("baseline").get<std::string>();
    if (labels.count(baseline) == 0) {
      throw SchemaMismatch("baseline names no configured endpoint: " + baseline);
    }
    cfg.baseline_label = baseline;
  }

  if (doc.contains("analysis")) {
    const json& analysis = doc.at("analysis");
    cfg.analysis.mode = analogy::mode_from_string(analysis.value("mode", std::string("JACCARD")));
    cfg.analysis.alpha = analysis.value("alpha", cfg.analysis.alpha);
    cfg.analysis.wl_iterations = analysis.value("wl_iterations", cfg.analysis.wl_iterations);
    cfg.analysis.significance_level =
        analysis.value("significance_level", cfg.analysis.significance_level);
    if (analysis.contains("complexity_bins")) {
      cfg.analysis.complexity_bins = bins_from_json(analysis.at("complexity_bins"));
    }
  }
  return cfg;
}

void run_pipeline(const PipelineConfig& config) {
  const fs::path& out = config.out_dir;
  fs::create_directories(out);
  fs::create_directories(out / "prompts");
  fs::create_directories(out / "responses");
  fs::create_directories(out / "grades");
  fs::create_directories(out / "analysis");
  fs::create_directories(out / "reports");
  fs::create_directories(out / "run_records");

  // Dataset.
  std::vector<taskgraph::PlanInstance> instances;
  if (config.dataset.generate) {
    instances = taskgraph::generate(*config.dataset.generate);
  } else if (config.dataset.instances_path) {
    datapipe::IngestResult ingested = datapipe::ingest(
        *config.dataset.instances_path,
        datapipe::format_hint_from_string(config.dataset.ingest_format));
    instances = std::move(ingested.instances);
    datapipe::save_quarantine(out / "quarantine.jsonl", ingested.quarantined);
  } else {
    throw SchemaMismatch("pipeline config carries no dataset source");
  }
  instances = datapipe::dedup(instances);
  if (instances.empty()) throw DegenerateInput("dataset is empty after dedup");

  datapipe::SplitResult split =
      datapipe::stratified_split(instances, config.test_fraction, config.seed);
  taskgraph::save_instances(out / "instances.jsonl", instances);
  taskgraph::save_instances(out / "train.jsonl", split.train);
  taskgraph::save_instances(out / "test.jsonl", split.test);

  std::vector<std::string> train_ids, test_ids;
  for (const auto& inst : split.train) train_ids.push_back(inst.instance_id);
  for (const auto& inst : split.test) test_ids.push_back(inst.instance_id);

  // Prompts for every split x representation.
  struct SplitPrompts {
    std::string name;
    const std::vector<taskgraph::PlanInstance>* instances;
  };
  const SplitPrompts split_sets[] = {{"train", &split.train}, {"test", &split.test}};
  std::map<std::string, std::vector<render::RenderedPrompt>> prompts;  // "split_REP"
  for (const auto& s : split_sets) {
    for (auto rep : config.representations) {
      std::vector<render::RenderedPrompt> rendered;
      rendered.reserve(s.instances->size());
      for (const auto& inst : *s.instances) {
        std::uint64_t render_seed =
            mix_seed(mix_seed(config.seed, fnv1a64(inst.instance_id)),
                     fnv1a64(render::to_string(rep)));
        rendered.push_back(render::render(inst, rep, render_seed));
      }
      std::string tag = s.name + "_" + render::to_string(rep);
      render::save_prompts(out / "prompts" / (tag + ".jsonl"), rendered);
      prompts.emplace(tag, std::move(rendered));
    }
  }

  // Eval + grade, sequential over endpoints so reruns hit caches in order.
  std::map<std::string, std::vector<grade::GradeRecord>> grades;  // "label_split_REP"
  for (const auto& endpoint : config.endpoints) {
    for (const auto& s : split_sets) {
      for (auto rep : config.representations) {
        std::string tag = s.name + "_" + render::to_string(rep);
        std::string file_tag = endpoint.label + "_" + tag;
        const auto& prompt_set = prompts.at(tag);
        fs::path response_path = out / "responses" / (file_tag + ".jsonl");
        RunRecord record = eval_run(prompt_set, endpoint, response_path);
        save_run_record(out / "run_records" / (file_tag + ".json"), record);
        auto responses = grade::load_responses(response_path);
        auto graded = grade::grade_all(responses, prompt_set);
        grade::save_grades(out / "grades" / (file_tag + ".jsonl"), graded);
        grades.emplace(file_tag, std::move(graded));
      }
    }
  }

  // Similarity matrix between test rows and train columns, cached on disk.
  analogy::StrengthOptions strength;
  strength.mode = config.analysis.mode;
  strength.alpha = config.analysis.alpha;
  strength.wl.iterations = config.analysis.wl_iterations;
  std::vector<taskgraph::PlanInstance> combined = split.test;
  combined.insert(combined.end(), split.train.begin(), split.train.end());
  fs::path cache_path =
      out / "analysis" / analogy::cache_name(taskgraph::dataset_hash(combined), strength);
  std::optional<analogy::SimilarityMatrix> sim;
  bool have_pairs = !split.test.empty() && !split.train.empty();
  if (have_pairs) {
    sim = analogy::load_matrix_cache(cache_path);
    if (!sim) {
      sim = analogy::similarity_matrix(split.test, split.train, strength);
      analogy::save_matrix_cache(cache_path, *sim);
    }
    analogy::save_matrix_csv(out / "analysis" / "similarity.csv", *sim);
  }

  // Accuracy grid: endpoints (train representation) x test representations.
  const bool has_baseline = config.baseline_label.has_value();
  std::map<std::string, GridCell> grid;  // "label_REP"
  for (const auto& endpoint : config.endpoints) {
    for (auto rep : config.representations) {
      std::string rep_name = render::to_string(rep);
      std::string key = endpoint.label + "_" + rep_name;
      const auto& graded = grades.at(endpoint.label + "_test_" + rep_name);
      stats::OutcomeVector mine = outcomes_over(graded, test_ids, key);
      GridCell cell;
      long long correct = 0;
      for (bool c : mine.correct) correct += c ? 1 : 0;
      cell.accuracy = test_ids.empty() ? 0.0
                                       : static_cast<double>(correct) /
                                             static_cast<double>(test_ids.size());
      if (has_baseline && endpoint.label != *config.baseline_label) {
        const auto& base_graded = grades.at(*config.baseline_label + "_test_" + rep_name);
        stats::OutcomeVector base = outcomes_over(base_graded, test_ids, "baseline");
        stats::McNemarResult mc = stats::mcnemar(mine, base);
        cell.vs_baseline = mc;
        if (mc.p_value < config.analysis.significance_level &&
            mc.direction == stats::Direction::ABetter) {
          cell.marker = "+";
        } else if (mc.p_value < config.analysis.significance_level &&
                   mc.direction == stats::Direction::BBetter) {
          cell.marker = "-";
        } else {
          cell.marker = "=";
        }
      }
      grid.emplace(key, std::move(cell));
    }
  }

  {
    std::ostringstream csv;
    csv << "endpoint,train_representation,test_representation,accuracy,vs_baseline,mcnemar_p\n";
    std::ostringstream md;
    md << "| train \\ test |";
    for (auto rep : config.representations) md << ' ' << render::to_string(rep) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < config.representations.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& endpoint : config.endpoints) {
      std::string row_label = endpoint.label;
      if (!endpoint.train_representation.empty()) {
        row_label += " (" + endpoint.train_representation + ")";
      }
      md << "| " << row_label << " |";
      for (auto rep : config.representations) {
        std::string rep_name = render::to_string(rep);
        const GridCell& cell = grid.at(endpoint.label + "_" + rep_name);
        csv << endpoint.label << ',' << endpoint.train_representation << ',' << rep_name << ','
            << fmt("%.6f", cell.accuracy) << ',' << cell.marker << ',';
        if (cell.vs_baseline) csv << fmt("%.6g", cell.vs_baseline->p_value);
        csv << '\n';
        md << ' ' << fmt("%.3f", cell.accuracy);
        if (!cell.marker.empty()) md << " (" << cell.marker << ")";
        md << " |";
      }
      md << '\n';
    }
    write_text_file(out / "reports" / "accuracy_grid.csv", csv.str());
    write_text_file(out / "reports" / "accuracy_grid.md", md.str());
  }

  if (has_baseline) {
    std::ostringstream csv;
    csv << "endpoint,test_representation,b10,b01,statistic,p_value,direction,exact\n";
    for (const auto& endpoint : config.endpoints) {
      if (endpoint.label == *config.baseline_label) continue;
      for (auto rep : config.representations) {
        std::string rep_name = render::to_string(rep);
        const GridCell& cell = grid.at(endpoint.label + "_" + rep_name);
        if (!cell.vs_baseline) continue;
        const stats::McNemarResult& mc = *cell.vs_baseline;
        csv << endpoint.label << ',' << rep_name << ',' << mc.b10 << ',' << mc.b01 << ','
            << fmt("%.6g", mc.statistic) << ',' << fmt("%.6g", mc.p_value) << ','
            << stats::to_string(mc.direction) << ',' << (mc.exact ? "true" : "false") << '\n';
      }
    }
    write_text_file(out / "reports" / "mcnemar.csv", csv.str());
  }

  // Hypothesis sweeps and per-complexity tables per endpoint x test rep.
  for (const auto& endpoint : config.endpoints) {
    std::string train_rep_name = endpoint.train_representation;
    for (auto rep : config.representations) {
      std::string rep_name = render::to_string(rep);
      std::string file_tag = endpoint.label + "_" + rep_name;
      const auto& graded = grades.at(endpoint.label + "_test_" + rep_name);

      if (have_pairs) {
        std::string learned_rep = train_rep_name.empty() ? rep_name : train_rep_name;
        const auto& train_graded = grades.at(endpoint.label + "_train_" + learned_rep);
        std::set<std::string> learned;
        for (const auto& g : train_graded) {
          if (g.correct) learned.insert(g.instance_id);
        }
        stats::OutcomeVector test_outcomes = outcomes_over(graded, test_ids, file_tag);
        stats::HypothesisReport sweep = stats::hypothesis_sweep(
            test_outcomes, learned, *sim, config.analysis.significance_level);
        write_text_file(out / "reports" / ("hypothesis_" + file_tag + ".csv"),
                        stats::hypothesis_report_csv(sweep));
        write_text_file(out / "reports" / ("hypothesis_" + file_tag + ".md"),
                        "```\n" + stats::hypothesis_report_text(sweep) + "```\n");
      }

      auto bins = stats::accuracy_by_complexity(graded, split.test, config.analysis.complexity_bins);
      write_text_file(out / "reports" / ("complexity_" + file_tag + ".csv"),
                      stats::complexity_table_csv(bins));
      write_text_file(out / "reports" / ("complexity_" + file_tag + ".md"),
                      "```\n" + stats::complexity_table_text(bins) + "```\n");
    }
  }

  // Pairwise outcome correlation between endpoints on each test representation.
  if (config.endpoints.size() >= 2) {
    std::ostringstream csv;
    csv << "endpoint_a,endpoint_b,test_representation,rho,p_value\n";
    for (std::size_t i = 0; i < config.endpoints.size(); ++i) {
      for (std::size_t j = i + 1; j < config.endpoints.size(); ++j) {
        for (auto rep : config.representations) {
          std::string rep_name = render::to_string(rep);
          const auto& a = grades.at(config.endpoints[i].label + "_test_" + rep_name);
          const auto& b = grades.at(config.endpoints[j].label + "_test_" + rep_name);
          csv << config.endpoints[i].label << ',' << config.endpoints[j].label << ','
              << rep_name << ',';
          try {
            stats::PearsonResult r = stats::outcome_correlation(
                outcomes_over(a, test_ids, "a"), outcomes_over(b, test_ids, "b"));
            csv << fmt("%.6f", r.rho) << ',' << fmt("%.6g", r.p_value) << '\n';
          } catch (const DegenerateInput&) {
            csv << "n/a,n/a\n";
          }
        }
      }
    }
    write_text_file(out / "reports" / "outcome_correlation.csv", csv.str());
  }
}

}  // namespace isoplan::harness
