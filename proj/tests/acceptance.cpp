// Acceptance gate. Each check prints one PASS/FAIL line; the exit code is
// the number of failing checks. Run it standalone or through ctest.

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "isoplan/analogy.hpp"
#include "isoplan/errors.hpp"
#include "isoplan/grade.hpp"
#include "isoplan/harness.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/rational.hpp"
#include "isoplan/render.hpp"
#include "isoplan/stats.hpp"
#include "isoplan/taskgraph.hpp"
#include "test_support.hpp"

using namespace isoplan;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void run_check(const std::string& name, const std::function<std::string()>& body) {
  auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  try {
    detail = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("threw ") + e.what();
  }
  if (detail.rfind("FAIL", 0) == 0) {
    ok = false;
    detail = detail.substr(detail.find(' ') + 1);
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  std::printf("%s  %-28s %s (%lld ms)\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str(),
              static_cast<long long>(ms));
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fail(const std::string& why) { return "FAIL " + why; }

// ---- worked example ----

std::string check_worked_example() {
  auto start = std::chrono::steady_clock::now();
  taskgraph::PlanInstance salad = testsupport::salad_instance();

  render::RenderedPrompt nl = render::render(salad, render::Representation::NL, 0);
  if (nl.prompt_text + "\n" != read_text_file(testsupport::fixture("salad_nl.txt")))
    return fail("NL prompt differs from golden file");
  if (nl.gold_answer_text != "35 min") return fail("NL gold is " + nl.gold_answer_text);

  render::RenderedPrompt graph = render::render(salad, render::Representation::GRAPH, 0);
  if (graph.prompt_text + "\n" != read_text_file(testsupport::fixture("salad_graph.txt")))
    return fail("GRAPH prompt differs from golden file");
  if (graph.gold_answer_text != "35 min") return fail("GRAPH gold is " + graph.gold_answer_text);

  render::CodeRenderOptions options;
  options.alias_override = std::map<int, int>{{0, 811}, {1, 639}, {2, 339}, {3, 621}, {4, 833}};
  render::RenderedPrompt code = render::render_code(salad, 0, options);
  if (code.prompt_text + "\n" != read_text_file(testsupport::fixture("salad_code.txt")))
    return fail("CODE prompt differs from golden file");
  if (code.gold_answer_text != "35.0") return fail("CODE gold is " + code.gold_answer_text);
  if (code.gold_minutes != Rational(35)) return fail("CODE gold minutes off");

  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  if (ms >= 1000) return fail("took " + std::to_string(ms) + " ms, limit 1000");
  return "three prompts byte-exact, golds 35 min / 35 min / 35.0";
}

// ---- transcript grading ----

std::string check_transcript_grading() {
  taskgraph::PlanInstance mower = testsupport::lawnmower_instance();
  render::RenderedPrompt prompt = render::render(mower, render::Representation::NL, 0);

  std::string good =
      "Getting the mower out gates everything, and the parts check is the slower of the two "
      "prep branches, so the chain runs through steps 1, 3, 4 and 5.\n"
      "<answer>85 minutes</answer>";
  std::string bad =
      "Taking the gas check branch: 5 + 5 + 5 + 60 for the four stages in a row.\n"
      "<answer>75 minutes</answer>";

  grade::GradeRecord g = grade::grade_response(good, prompt);
  grade::GradeRecord b = grade::grade_response(bad, prompt);
  if (!g.correct) return fail("85-minute response graded incorrect");
  if (g.extracted_minutes != Rational(85)) return fail("85-minute response extracted wrong value");
  if (b.correct) return fail("75-minute response graded correct");
  if (b.failure != grade::Failure::Mismatch) return fail("75-minute response wrong failure kind");
  return "85-minute answer correct, 75-minute answer a mismatch";
}

// ---- longest path vs exhaustive enumeration ----

Rational exhaustive_longest(const taskgraph::PlanInstance& instance) {
  std::map<int, Rational> duration;
  std::map<int, std::vector<int>> next;
  std::set<int> has_pred;
  for (const auto& step : instance.steps) duration[step.id] = step.duration_minutes;
  for (const auto& [u, v] : instance.edges) {
    next[u].push_back(v);
    has_pred.insert(v);
  }
  Rational best(0);
  std::function<void(int, Rational)> walk = [&](int node, Rational total) {
    if (best < total) best = total;
    for (int succ : next[node]) walk(succ, total + duration[succ]);
  };
  for (const auto& step : instance.steps) {
    if (!has_pred.count(step.id)) walk(step.id, duration[step.id]);
  }
  return best;
}

std::string check_longest_path_oracle() {
  auto start = std::chrono::steady_clock::now();
  int tested = 0;
  std::uint64_t seed = 900;
  while (tested < 500) {
    for (const auto& inst : testsupport::random_instances(60, seed++, 5, 16)) {
      if (inst.steps.size() > 10) continue;
      if (taskgraph::longest_path_minutes(inst) != exhaustive_longest(inst)) {
        return fail("mismatch on " + inst.instance_id + " (seed " + std::to_string(seed - 1) +
                    ")");
      }
      if (++tested == 500) break;
    }
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  if (ms >= 5000) return fail("took " + std::to_string(ms) + " ms, limit 5000");
  return "500 DAGs of <= 10 nodes, 0 mismatches";
}

// ---- analogy axioms ----

std::string check_analogy_axioms() {
  std::vector<taskgraph::PlanInstance> pool = testsupport::random_instances(250, 31337);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

  analogy::StrengthOptions jaccard;
  analogy::StrengthOptions wl;
  wl.mode = analogy::Mode::WL;

  for (int pair = 0; pair < 1000; ++pair) {
    const auto& a = pool[pick(rng)];
    const auto& b = pool[pick(rng)];
    for (const auto& options : {jaccard, wl}) {
      double ab = analogy::analogical_strength(a, b, options).score;
      double ba = analogy::analogical_strength(b, a, options).score;
      if (ab != ba) return fail("symmetry broken on " + a.instance_id + "/" + b.instance_id);
      if (ab < 0.0 || ab > 1.0) return fail("score out of bounds on " + a.instance_id);
      double self = analogy::analogical_strength(a, a, options).score;
      if (std::fabs(1.0 - self) >= 1e-9) return fail("self-strength off on " + a.instance_id);
    }
  }

  // Same steps and edges, one duration changed 5 -> 20: duration multisets
  // overlap 2-of-4, identical edge sets, so 0.4 * 0.5 + 0.6 * 1 = 0.8.
  taskgraph::PlanInstance salad = testsupport::salad_instance();
  taskgraph::PlanInstance variant = salad;
  variant.instance_id = "salad-variant";
  variant.steps[2].duration_text = "20 min";
  variant.steps[2].duration_minutes = Rational(20);
  double score = analogy::analogical_strength(salad, variant, jaccard).score;
  if (score != 0.8) return fail("hand-derived case gave " + std::to_string(score));
  return "1000 pairs x 2 modes symmetric, self-unit, bounded; 0.8 case exact";
}

// ---- hypothesis sweep discrimination ----

std::string pad2(int i) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", i);
  return buf;
}

struct PlantedBenchmark {
  analogy::SimilarityMatrix sim;
  stats::OutcomeVector outcomes;
  std::set<std::string> learned;
};

// Correctness follows a threshold on the nearest-neighbor similarity: one
// planted neighbor per row sits in a high band for correct rows and a low
// band for incorrect ones, everything else is shared low-level noise.
PlantedBenchmark analogy_planted(std::uint64_t seed) {
  const int rows = 40, cols = 30;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> high(0.67, 0.75);
  std::uniform_real_distribution<double> low(0.55, 0.63);
  std::uniform_real_distribution<double> noise(0.05, 0.52);
  std::uniform_int_distribution<int> slot(0, cols - 1);

  PlantedBenchmark out;
  for (int j = 0; j < cols; ++j) {
    out.sim.col_ids.push_back("train" + pad2(j));
    out.learned.insert("train" + pad2(j));
  }
  for (int i = 0; i < rows; ++i) {
    bool correct = i % 2 == 0;
    out.sim.row_ids.push_back("test" + pad2(i));
    out.outcomes.ids.push_back("test" + pad2(i));
    out.outcomes.correct.push_back(correct);
    std::vector<double> row(cols);
    for (auto& v : row) v = noise(rng);
    row[static_cast<std::size_t>(slot(rng))] = correct ? high(rng) : low(rng);
    out.sim.values.insert(out.sim.values.end(), row.begin(), row.end());
  }
  out.outcomes.setting_label = "analogy_planted";
  return out;
}

// Correctness follows the number of moderately similar neighbors: a band of
// sims near 0.45 is large for correct rows and small for incorrect ones,
// while the top of every row comes from nearly the same distribution either
// way, so nearest-neighbor features carry far less signal.
PlantedBenchmark frequency_planted(std::uint64_t seed) {
  const int rows = 40, cols = 70, pool = 12;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> band(0.44, 0.46);
  std::uniform_real_distribution<double> top_hi(0.82, 0.95);
  std::uniform_real_distribution<double> top_lo(0.80, 0.93);
  std::uniform_real_distribution<double> filler(0.005, 0.045);
  std::uniform_int_distribution<int> many(35, 55);
  std::uniform_int_distribution<int> few(5, 25);

  PlantedBenchmark out;
  for (int j = 0; j < cols; ++j) {
    out.sim.col_ids.push_back("train" + pad2(j));
    out.learned.insert("train" + pad2(j));
  }
  for (int i = 0; i < rows; ++i) {
    bool correct = i % 2 == 0;
    out.sim.row_ids.push_back("test" + pad2(i));
    out.outcomes.ids.push_back("test" + pad2(i));
    out.outcomes.correct.push_back(correct);
    int band_count = correct ? many(rng) : few(rng);
    std::vector<double> row;
    for (int j = 0; j < pool; ++j) row.push_back(correct ? top_hi(rng) : top_lo(rng));
    for (int j = 0; j < band_count; ++j) row.push_back(band(rng));
    while (static_cast<int>(row.size()) < cols) row.push_back(filler(rng));
    std::shuffle(row.begin(), row.end(), rng);
    out.sim.values.insert(out.sim.values.end(), row.begin(), row.end());
  }
  out.outcomes.setting_label = "frequency_planted";
  return out;
}

std::string check_sweep_discrimination() {
  PlantedBenchmark nn = analogy_planted(11);
  stats::HypothesisReport nn_sweep =
      stats::hypothesis_sweep(nn.outcomes, nn.learned, nn.sim, 0.05);
  if (!nn_sweep.best_k || !nn_sweep.best_p)
    return fail("nearest-neighbor benchmark lost a best cell");
  if (nn_sweep.best_k->rho <= nn_sweep.best_p->rho)
    return fail("nearest-neighbor benchmark: best_k rho did not win");

  PlantedBenchmark freq = frequency_planted(12);
  stats::HypothesisReport freq_sweep =
      stats::hypothesis_sweep(freq.outcomes, freq.learned, freq.sim, 0.05);
  if (!freq_sweep.best_k || !freq_sweep.best_p)
    return fail("frequency benchmark lost a best cell");
  if (freq_sweep.best_p->rho <= freq_sweep.best_k->rho)
    return fail("frequency benchmark: best_p rho did not win");

  std::ostringstream detail;
  detail << "planted nn " << std::fixed << std::setprecision(3) << nn_sweep.best_k->rho << " > "
         << nn_sweep.best_p->rho << "; planted freq " << freq_sweep.best_p->rho << " > "
         << freq_sweep.best_k->rho;
  return detail.str();
}

// ---- mcnemar exact branch ----

long double mcnemar_tail_oracle(long long b10, long long b01) {
  long long n = b10 + b01;
  long long k = std::min(b10, b01);
  long double tail = 0.0L;
  for (long long i = 0; i <= k; ++i) {
    long double logc = std::lgamma(static_cast<long double>(n + 1)) -
                       std::lgamma(static_cast<long double>(i + 1)) -
                       std::lgamma(static_cast<long double>(n - i + 1));
    tail += std::exp(logc - static_cast<long double>(n) * std::log(2.0L));
  }
  long double p = 2.0L * tail;
  return p > 1.0L ? 1.0L : p;
}

std::string check_mcnemar() {
  for (long long b10 = 0; b10 <= 20; ++b10) {
    for (long long b01 = 0; b10 + b01 <= 20; ++b01) {
      stats::McNemarResult result = stats::mcnemar_counts(b10, b01);
      if (!result.exact)
        return fail("(" + std::to_string(b10) + "," + std::to_string(b01) + ") left exact branch");
      long double want = mcnemar_tail_oracle(b10, b01);
      if (std::fabs(static_cast<long double>(result.p_value) - want) > 1e-12L) {
        return fail("(" + std::to_string(b10) + "," + std::to_string(b01) + ") off by " +
                    std::to_string(static_cast<double>(
                        std::fabs(static_cast<long double>(result.p_value) - want))));
      }
    }
  }
  double p = stats::mcnemar_counts(10, 2).p_value;
  if (std::fabs(p - 158.0 / 4096.0) > 1e-15) return fail("(10,2) gave " + std::to_string(p));
  return "all b10+b01 <= 20 within 1e-12 of tail sum; (10,2) = 158/4096";
}

// ---- pearson reference ----

double pearson_p_oracle(double rho, std::size_t n) {
  if (1.0 - rho * rho <= 0.0) return 0.0;
  double nu = static_cast<double>(n - 2);
  double t = rho * std::sqrt(nu / (1.0 - rho * rho));
  boost::math::students_t_distribution<double> dist(nu);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

long double pearson_rho_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0.0L, my = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<long double>(x.size());
  my /= static_cast<long double>(x.size());
  long double sxx = 0.0L, syy = 0.0L, sxy = 0.0L;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::string check_pearson() {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> size(5, 200);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    int n = size(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = normal(rng);
      y[i] = trial % 3 == 0 ? 0.6 * x[i] + 0.8 * normal(rng) : normal(rng);
    }
    stats::PearsonResult got = stats::pearson(x, y);
    long double rho = pearson_rho_oracle(x, y);
    if (std::fabs(got.rho - static_cast<double>(rho)) > 1e-9)
      return fail("trial " + std::to_string(trial) + " rho off");
    double p = pearson_p_oracle(static_cast<double>(rho), x.size());
    if (std::fabs(got.p_value - p) > 1e-6)
      return fail("trial " + std::to_string(trial) + " p off");
  }
  return "100 vectors, rho within 1e-9 and p within 1e-6 of reference";
}

// ---- offline pipeline + determinism ----

harness::PipelineConfig pipeline_config(const fs::path& out_dir) {
  harness::PipelineConfig cfg;
  cfg.seed = 4242;
  cfg.out_dir = out_dir;
  taskgraph::GenerateOptions gen;
  gen.count = 100;
  gen.min_complexity = 5;
  gen.max_complexity = 20;
  gen.seed = 4242;
  cfg.dataset.generate = gen;
  cfg.test_fraction = 0.2;
  cfg.representations = {render::Representation::NL, render::Representation::GRAPH,
                         render::Representation::CODE};
  harness::EndpointConfig gold;
  gold.label = "gold";
  gold.base_url = "stub:gold";
  gold.train_representation = "GRAPH";
  gold.max_parallel = 8;
  gold.retry_backoff_ms = 1;
  gold.timeout_sec = 30;
  cfg.endpoints = {gold};
  return cfg;
}

std::string check_offline_pipeline(const fs::path& out_a) {
  auto start = std::chrono::steady_clock::now();
  harness::run_pipeline(pipeline_config(out_a));

  std::istringstream grid(read_text_file(out_a / "reports" / "accuracy_grid.csv"));
  std::string line;
  std::getline(grid, line);  // header
  int rows = 0;
  while (std::getline(grid, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) fields.push_back(cell);
    if (fields.size() < 4) return fail("grid row too short: " + line);
    if (fields[3] != "1.000000") return fail("grid cell below 1.0: " + line);
    ++rows;
  }
  if (rows != 3) return fail("expected 3 grid rows, saw " + std::to_string(rows));

  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  if (ms >= 60000) return fail("took " + std::to_string(ms) + " ms, limit 60000");
  return "100 instances x 3 representations, grid all 1.000000";
}

std::vector<fs::path> comparable_files(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), root);
    if (rel.begin()->string() == "run_records") continue;  // carries wall-clock times
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string check_determinism(const fs::path& out_a, const fs::path& out_b) {
  harness::run_pipeline(pipeline_config(out_b));

  std::vector<fs::path> a_files = comparable_files(out_a);
  std::vector<fs::path> b_files = comparable_files(out_b);
  if (a_files != b_files) return fail("runs produced different file sets");
  for (const auto& rel : a_files) {
    if (read_text_file(out_a / rel) != read_text_file(out_b / rel))
      return fail(rel.string() + " differs between runs");
  }
  return std::to_string(a_files.size()) + " files byte-identical across reruns";
}

}  // namespace

int main() {
  fs::path work = testsupport::temp_dir("acceptance");
  run_check("worked-example rendering", check_worked_example);
  run_check("transcript grading", check_transcript_grading);
  run_check("critical-path oracle", check_longest_path_oracle);
  run_check("analogy axioms", check_analogy_axioms);
  run_check("sweep discrimination", check_sweep_discrimination);
  run_check("mcnemar exact branch", check_mcnemar);
  run_check("pearson reference", check_pearson);
  run_check("offline pipeline", [&] { return check_offline_pipeline(work / "run_a"); });
  run_check("determinism", [&] { return check_determinism(work / "run_a", work / "run_b"); });
  if (failures > 0) std::printf("%d check(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
