#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "isoplan/analogy.hpp"
#include "isoplan/errors.hpp"
#include "isoplan/taskgraph.hpp"
#include "test_support.hpp"

using namespace isoplan;

namespace {

taskgraph::PlanInstance chain(const std::string& id, const std::vector<int>& minutes) {
  taskgraph::PlanInstance inst;
  inst.instance_id = id;
  inst.task_name = "chain " + id;
  for (size_t i = 0; i < minutes.size(); ++i) {
    int step = static_cast<int>(i) + 1;
    inst.steps.push_back({step, "Link " + std::to_string(step) + ".",
                          std::to_string(minutes[i]) + " min", Rational(minutes[i])});
    if (i > 0) inst.edges.push_back({step - 1, step});
  }
  return inst;
}

// Reference WL refinement that never interns: labels stay full strings, so
// any bookkeeping bug in the integer dictionary shows up as a mismatch.
using StringFeatures = std::map<std::string, long long>;

StringFeatures wl_reference_features(const taskgraph::PlanInstance& inst, int iterations) {
  int n = static_cast<int>(inst.steps.size());
  std::vector<std::vector<int>> ins(n);
  std::vector<std::vector<int>> outs(n);
  for (const auto& [u, v] : inst.edges) {
    outs[u - 1].push_back(v - 1);
    ins[v - 1].push_back(u - 1);
  }
  std::vector<std::string> labels(n, "u");
  StringFeatures features;
  for (const auto& l : labels) features[l]++;
  for (int round = 0; round < iterations; ++round) {
    std::vector<std::string> next(n);
    for (int v = 0; v < n; ++v) {
      std::vector<std::string> in_l;
      std::vector<std::string> out_l;
      for (int u : ins[v]) in_l.push_back(labels[u]);
      for (int u : outs[v]) out_l.push_back(labels[u]);
      std::sort(in_l.begin(), in_l.end());
      std::sort(out_l.begin(), out_l.end());
      std::string key = "(" + labels[v] + "|in";
      for (const auto& l : in_l) key += "[" + l + "]";
      key += "|out";
      for (const auto& l : out_l) key += "[" + l + "]";
      key += ")";
      next[v] = key;
    }
    labels = std::move(next);
    for (const auto& l : labels) features[l]++;
  }
  return features;
}

double wl_reference(const taskgraph::PlanInstance& a, const taskgraph::PlanInstance& b,
                    int iterations) {
  StringFeatures fa = wl_reference_features(a, iterations);
  StringFeatures fb = wl_reference_features(b, iterations);
  double raw = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (const auto& [k, v] : fa) {
    na += static_cast<double>(v) * static_cast<double>(v);
    auto it = fb.find(k);
    if (it != fb.end()) raw += static_cast<double>(v) * static_cast<double>(it->second);
  }
  for (const auto& [k, v] : fb) nb += static_cast<double>(v) * static_cast<double>(v);
  if (raw == 0.0) return 0.0;
  return raw / std::sqrt(na * nb);
}

}  // namespace

TEST_CASE("hand-computed similarity values") {
  auto c3 = chain("c3", {10, 10, 10});
  auto c2 = chain("c2", {10, 10});

  SUBCASE("wl kernel of the two uniform chains") {
    // Feature counts by hand: dot 8, norms sqrt(18) and sqrt(10).
    CHECK(analogy::wl_kernel(c3, c2, 3) == doctest::Approx(8.0 / std::sqrt(180.0)).epsilon(1e-14));
    CHECK(analogy::wl_kernel(c3, c2, 3) == doctest::Approx(0.5962847939999439).epsilon(1e-13));
  }
  SUBCASE("iteration zero with uniform seeds is always 1") {
    CHECK(analogy::wl_kernel(c3, c2, 0) == doctest::Approx(1.0).epsilon(1e-15));
    auto star = testsupport::salad_instance();
    CHECK(analogy::wl_kernel(star, c2, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("duration seeds change iteration zero to a count cosine") {
    analogy::WlOptions opt;
    opt.iterations = 0;
    opt.duration_labels = true;
    auto a = chain("a", {30, 10});
    auto b = chain("b", {30, 30});
    CHECK(analogy::wl_kernel(a, b, opt) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  }

  SUBCASE("duration jaccard is a multiset ratio") {
    taskgraph::PlanInstance a = chain("a", {30, 10, 5});
    taskgraph::PlanInstance b = chain("b", {30, 10, 20});
    CHECK(analogy::duration_jaccard(a, b) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(analogy::duration_jaccard(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    taskgraph::PlanInstance twice = chain("t", {30, 30});
    taskgraph::PlanInstance once = chain("o", {30, 10});
    // min counts: 30 -> 1; max counts: 30 -> 2, 10 -> 1.
    CHECK(analogy::duration_jaccard(twice, once) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  SUBCASE("edge jaccard over ordered pairs") {
    auto salad = testsupport::salad_instance();  // edges (1,3), (2,3)
    auto path = chain("p", {30, 10, 5});         // edges (1,2), (2,3)
    CHECK(analogy::edge_jaccard(salad, path) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    taskgraph::PlanInstance solo_a = chain("sa", {5});
    taskgraph::PlanInstance solo_b = chain("sb", {10});
    CHECK(analogy::edge_jaccard(solo_a, solo_b) == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("jaccard-mode strength blends the two ratios") {
    taskgraph::PlanInstance a = testsupport::salad_instance();
    taskgraph::PlanInstance b = a;
    b.instance_id = "salad-variant";
    b.steps[2].duration_text = "20 min";
    b.steps[2].duration_minutes = Rational(20);
    // durations {30,10,5} vs {30,10,20} -> 0.5, identical edges -> 1.
    analogy::StrengthOptions opt;
    opt.mode = analogy::Mode::Jaccard;
    opt.alpha = 0.4;
    auto score = analogy::analogical_strength(a, b, opt);
    CHECK(score.score == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(score.base_id == "salad");
    CHECK(score.target_id == "salad-variant");
    CHECK(score.mode == analogy::Mode::Jaccard);
    CHECK(score.alpha == doctest::Approx(0.4));
  }

  SUBCASE("wl-mode strength uses the kernel as its structural term") {
    analogy::StrengthOptions opt;
    opt.mode = analogy::Mode::WL;
    opt.alpha = 0.25;
    opt.wl.iterations = 3;
    double expected = 0.25 * analogy::duration_jaccard(c3, c2) +
                      0.75 * analogy::wl_kernel(c3, c2, 3);
    CHECK(analogy::analogical_strength(c3, c2, opt).score ==
          doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("wl kernel matches a string-refinement reference") {
  auto instances = testsupport::random_instances(16, 9001, 5, 20);
  for (int iterations : {0, 1, 3, 5}) {
    for (size_t i = 0; i < instances.size(); ++i) {
      for (size_t j = i; j < instances.size(); j += 3) {
        CAPTURE(iterations);
        CAPTURE(instances[i].instance_id);
        CAPTURE(instances[j].instance_id);
        double expected = wl_reference(instances[i], instances[j], iterations);
        CHECK(analogy::wl_kernel(instances[i], instances[j], iterations) ==
              doctest::Approx(expected).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("similarity axioms hold on random pairs in both modes") {
  auto instances = testsupport::random_instances(24, 5150, 5, 18);
  for (auto mode : {analogy::Mode::Jaccard, analogy::Mode::WL}) {
    analogy::StrengthOptions opt;
    opt.mode = mode;
    opt.alpha = 0.3;
    for (size_t i = 0; i < instances.size(); ++i) {
      auto self = analogy::analogical_strength(instances[i], instances[i], opt);
      CHECK(std::abs(self.score - 1.0) < 1e-12);
      for (size_t j = i + 1; j < instances.size(); j += 2) {
        double ab = analogy::analogical_strength(instances[i], instances[j], opt).score;
        double ba = analogy::analogical_strength(instances[j], instances[i], opt).score;
        CAPTURE(analogy::to_string(mode));
        CHECK(ab == ba);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
      }
    }
  }
}

TEST_CASE("alpha outside the open interval is rejected") {
  auto a = chain("a", {5, 10});
  auto b = chain("b", {5, 15});
  analogy::StrengthOptions opt;
  for (double bad : {0.0, 0.5, -0.1, 0.7, 1.0}) {
    opt.alpha = bad;
    CAPTURE(bad);
    CHECK_THROWS_AS(analogy::analogical_strength(a, b, opt), InvalidAlpha);
    CHECK_THROWS_AS(analogy::similarity_matrix({a}, {b}, opt), InvalidAlpha);
  }
  for (double fine : {0.499, 1e-6, 0.25}) {
    opt.alpha = fine;
    CHECK_NOTHROW(analogy::analogical_strength(a, b, opt));
  }
}

TEST_CASE("matrix agrees with pairwise scores and ignores thread count") {
  auto rows = testsupport::random_instances(12, 33, 5, 16);
  auto cols = testsupport::random_instances(9, 44, 5, 16);
  for (auto mode : {analogy::Mode::Jaccard, analogy::Mode::WL}) {
    analogy::StrengthOptions opt;
    opt.mode = mode;
    opt.alpha = 0.4;
    auto serial = analogy::similarity_matrix(rows, cols, opt, 1);
    auto parallel = analogy::similarity_matrix(rows, cols, opt, 4);
    REQUIRE(serial.values.size() == rows.size() * cols.size());
    CHECK(serial.values == parallel.values);
    CHECK(serial.row_ids == parallel.row_ids);
    for (size_t i = 0; i < rows.size(); ++i) {
      for (size_t j = 0; j < cols.size(); ++j) {
        double pairwise = analogy::analogical_strength(rows[i], cols[j], opt).score;
        CAPTURE(analogy::to_string(mode));
        CHECK(serial.at(i, j) == pairwise);
      }
    }
  }
}

TEST_CASE("empty inputs are rejected, empty overlaps degrade gracefully") {
  auto rows = testsupport::random_instances(3, 1);
  CHECK_THROWS_AS(analogy::similarity_matrix({}, rows, {}), DegenerateInput);
  CHECK_THROWS_AS(analogy::similarity_matrix(rows, {}, {}), DegenerateInput);

  taskgraph::PlanInstance a = chain("a", {5});
  taskgraph::PlanInstance b = chain("b", {10});
  // No edges on either side: structure is vacuously identical, durations
  // are disjoint.
  analogy::StrengthOptions opt;
  opt.alpha = 0.4;
  CHECK(analogy::analogical_strength(a, b, opt).score == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("dummy nodes stay out of the kernel unless asked for") {
  auto c3 = chain("c3", {10, 10, 10});
  auto c2 = chain("c2", {10, 10});
  analogy::WlOptions plain;
  plain.iterations = 3;
  analogy::WlOptions dummies = plain;
  dummies.include_dummies = true;
  CHECK(analogy::wl_kernel(c3, c2, plain) != analogy::wl_kernel(c3, c2, dummies));
  CHECK(analogy::wl_kernel(c3, c3, dummies) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("matrix csv snapshot and binary cache round trip") {
  auto a = chain("alpha", {5, 10});
  auto b = chain("beta", {5, 15});
  auto c = chain("gamma", {20});
  analogy::StrengthOptions opt;
  opt.mode = analogy::Mode::WL;
  opt.alpha = 0.3;
  opt.wl.iterations = 2;
  auto m = analogy::similarity_matrix({a, b}, {b, c}, opt, 1);

  auto dir = testsupport::temp_dir("analogy_cache");

  SUBCASE("csv layout") {
    auto csv_path = dir / "sim.csv";
    analogy::save_matrix_csv(csv_path, m);
    std::ifstream in(csv_path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "row_id,col_id,score");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].rfind("alpha,beta,", 0) == 0);
    CHECK(rows[3].rfind("beta,gamma,", 0) == 0);
  }

  SUBCASE("binary cache preserves exact doubles") {
    auto bin_path = dir / "sim.bin";
    analogy::save_matrix_cache(bin_path, m);
    auto loaded = analogy::load_matrix_cache(bin_path);
    REQUIRE(loaded.has_value());
    CHECK(loaded->row_ids == m.row_ids);
    CHECK(loaded->col_ids == m.col_ids);
    CHECK(loaded->values == m.values);
    CHECK(loaded->mode == m.mode);
    CHECK(loaded->alpha == m.alpha);
  }

  SUBCASE("missing or corrupt caches read as absent") {
    CHECK_FALSE(analogy::load_matrix_cache(dir / "nope.bin").has_value());
    auto junk_path = dir / "junk.bin";
    std::ofstream(junk_path, std::ios::binary) << "not a cache at all";
    CHECK_FALSE(analogy::load_matrix_cache(junk_path).has_value());
  }

  SUBCASE("cache names key on hash, mode, alpha, and iterations") {
    analogy::StrengthOptions jac;
    jac.mode = analogy::Mode::Jaccard;
    jac.alpha = 0.4;
    CHECK(analogy::cache_name("deadbeef", jac) == "sim_deadbeef_JACCARD_a0.400_i0.bin");
    CHECK(analogy::cache_name("deadbeef", opt) == "sim_deadbeef_WL_a0.300_i2.bin");
    analogy::StrengthOptions other = opt;
    other.wl.iterations = 4;
    CHECK(analogy::cache_name("deadbeef", opt) != analogy::cache_name("deadbeef", other));
  }
}

TEST_CASE("mode names round trip and reject strangers") {
  CHECK(analogy::to_string(analogy::Mode::Jaccard) == "JACCARD");
  CHECK(analogy::to_string(analogy::Mode::WL) == "WL");
  CHECK(analogy::mode_from_string("jaccard") == analogy::Mode::Jaccard);
  CHECK(analogy::mode_from_string("WL") == analogy::Mode::WL);
  CHECK(analogy::mode_from_string("wl") == analogy::Mode::WL);
  CHECK_THROWS_AS(analogy::mode_from_string("COSINE"), SchemaMismatch);
}
