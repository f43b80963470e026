#include <algorithm>
#include <map>
#include <set>
#include <string>

#include "doctest.h"
#include "isoplan/errors.hpp"
#include "isoplan/jsonl.hpp"
#include "isoplan/render.hpp"
#include "test_support.hpp"

using namespace isoplan;
using render::Representation;

TEST_CASE("salad worked example matches the golden prompts byte for byte") {
  taskgraph::PlanInstance salad = testsupport::salad_instance();

  render::RenderedPrompt nl = render::render(salad, Representation::NL, 0);
  CHECK(nl.prompt_text + "\n" == read_text_file(testsupport::fixture("salad_nl.txt")));
  CHECK(nl.gold_answer_text == "35 min");
  CHECK(nl.gold_minutes == Rational(35));

  render::RenderedPrompt graph = render::render(salad, Representation::GRAPH, 0);
  CHECK(graph.prompt_text + "\n" == read_text_file(testsupport::fixture("salad_graph.txt")));
  CHECK(graph.gold_answer_text == "35 min");

  render::CodeRenderOptions options;
  options.alias_override = std::map<int, int>{{0, 811}, {1, 639}, {2, 339}, {3, 621}, {4, 833}};
  render::RenderedPrompt code = render::render_code(salad, 0, options);
  CHECK(code.prompt_text + "\n" == read_text_file(testsupport::fixture("salad_code.txt")));
  CHECK(code.gold_answer_text == "35.0");
  CHECK(code.gold_minutes == Rational(35));
}

TEST_CASE("rendering is deterministic and seed-sensitive where it should be") {
  auto instances = testsupport::random_instances(6, 51);
  for (const auto& inst : instances) {
    for (auto rep : {Representation::NL, Representation::GRAPH, Representation::CODE}) {
      render::RenderedPrompt a = render::render(inst, rep, 1234);
      render::RenderedPrompt b = render::render(inst, rep, 1234);
      CHECK(a.prompt_text == b.prompt_text);
      CHECK(a.gold_answer_text == b.gold_answer_text);
    }
    // NL and GRAPH ignore the seed; CODE aliases depend on it.
    CHECK(render::render(inst, Representation::NL, 1).prompt_text ==
          render::render(inst, Representation::NL, 2).prompt_text);
    CHECK(render::render(inst, Representation::GRAPH, 1).prompt_text ==
          render::render(inst, Representation::GRAPH, 2).prompt_text);
  }
  bool any_alias_change = false;
  for (const auto& inst : instances) {
    if (render::render(inst, Representation::CODE, 1).prompt_text !=
        render::render(inst, Representation::CODE, 2).prompt_text) {
      any_alias_change = true;
    }
  }
  CHECK(any_alias_change);
}

TEST_CASE("code aliases are collision-free three-digit-or-wider ints") {
  auto instances = testsupport::random_instances(10, 8, 10, 26);
  for (const auto& inst : instances) {
    render::RenderedPrompt code = render::render(inst, Representation::CODE, 77);
    // Pull every alias used as an adjacency key.
    std::set<int> aliases;
    std::size_t pos = code.prompt_text.find("adj_list = {");
    REQUIRE(pos != std::string::npos);
    pos += 12;
    while (true) {
      std::size_t colon = code.prompt_text.find(':', pos);
      std::size_t brace = code.prompt_text.find('}', pos);
      if (colon == std::string::npos || brace < colon) break;
      std::size_t digits = colon;
      while (digits > pos && std::isdigit(static_cast<unsigned char>(
                                 code.prompt_text[digits - 1]))) {
        --digits;
      }
      int alias = std::stoi(code.prompt_text.substr(digits, colon - digits));
      CHECK(alias >= 100);
      CHECK(aliases.insert(alias).second);
      pos = colon + 1;
    }
    CHECK(aliases.size() == inst.steps.size() + 2);
  }
}

TEST_CASE("graph prompts parse back to the instance they came from") {
  auto instances = testsupport::random_instances(25, 99, 5, 22);
  for (const auto& inst : instances) {
    render::RenderedPrompt graph = render::render(inst, Representation::GRAPH, 0);
    render::ParsedGraphPrompt parsed = render::parse_graph_prompt(graph.prompt_text);

    std::vector<std::pair<int, int>> want = inst.edges;
    std::sort(want.begin(), want.end());
    CHECK(parsed.edges == want);

    REQUIRE(parsed.duration_text_by_step.size() == inst.steps.size());
    for (const auto& step : inst.steps) {
      CHECK(parsed.duration_text_by_step.at(step.id) == step.duration_text);
    }
  }
}

TEST_CASE("gold answers use the shared unit family when it stays integral") {
  taskgraph::PlanInstance inst;
  inst.instance_id = "hours";
  inst.task_name = "wait it out";
  inst.steps = {
      {1, "Wait first.", "1 hour", Rational(60)},
      {2, "Wait more.", "2 hours", Rational(120)},
  };
  inst.edges = {{1, 2}};
  CHECK(render::render(inst, Representation::NL, 0).gold_answer_text == "3 hours");
  CHECK(render::render(inst, Representation::CODE, 0).gold_answer_text == "180.0");

  inst.steps[1].duration_text = "30 min";
  inst.steps[1].duration_minutes = Rational(30);
  CHECK(render::render(inst, Representation::NL, 0).gold_answer_text == "90 min");

  inst.steps = {{1, "Wait a week.", "1 week", Rational(10080)},
                {2, "Wait a day.", "3 days", Rational(4320)}};
  inst.edges = {{1, 2}};
  CHECK(render::render(inst, Representation::NL, 0).gold_answer_text == "10 days");

  inst.steps = {{1, "Wait oddly.", "2.5 min", Rational(5, 2)},
                {2, "Wait again.", "2.25 min", Rational(9, 4)}};
  inst.edges = {{1, 2}};
  CHECK(render::render(inst, Representation::NL, 0).gold_answer_text == "4.75 min");
}

TEST_CASE("NL constraints come out sorted by (u, v)") {
  taskgraph::PlanInstance inst;
  inst.instance_id = "sorting";
  inst.task_name = "sort the constraints";
  inst.steps = {
      {1, "One.", "5 min", Rational(5)},
      {2, "Two.", "5 min", Rational(5)},
      {3, "Three.", "5 min", Rational(5)},
  };
  inst.edges = {{2, 3}, {1, 3}, {1, 2}};
  std::string text = render::render(inst, Representation::NL, 0).prompt_text;
  std::size_t a = text.find("Step 1 must precede step 2.");
  std::size_t b = text.find("Step 1 must precede step 3.");
  std::size_t c = text.find("Step 2 must precede step 3.");
  REQUIRE(a != std::string::npos);
  REQUIRE(b != std::string::npos);
  REQUIRE(c != std::string::npos);
  CHECK(a < b);
  CHECK(b < c);
}

TEST_CASE("prompt JSONL round-trips with exact gold recovery") {
  auto dir = testsupport::temp_dir("render_io");
  auto instances = testsupport::random_instances(8, 5);
  std::vector<render::RenderedPrompt> prompts;
  for (const auto& inst : instances) {
    prompts.push_back(render::render(inst, Representation::CODE, 31));
  }
  render::save_prompts(dir / "p.jsonl", prompts);
  auto loaded = render::load_prompts(dir / "p.jsonl");
  REQUIRE(loaded.size() == prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(loaded[i].prompt_text == prompts[i].prompt_text);
    CHECK(loaded[i].gold_minutes == prompts[i].gold_minutes);
    CHECK(loaded[i].render_seed == prompts[i].render_seed);
  }

  nlohmann::json record = render::to_json(prompts[0]);
  record["gold_minutes"] = prompts[0].gold_minutes.to_double() + 1.0;
  CHECK_THROWS_AS(render::prompt_from_json(record), SchemaMismatch);
  record = render::to_json(prompts[0]);
  record["representation"] = "HOLOGRAM";
  CHECK_THROWS_AS(render::prompt_from_json(record), SchemaMismatch);
}

TEST_CASE("representation names round-trip and reject junk") {
  for (auto rep : {Representation::NL, Representation::GRAPH, Representation::CODE}) {
    CHECK(render::representation_from_string(render::to_string(rep)) == rep);
  }
  CHECK(render::representation_from_string("graph") == Representation::GRAPH);
  CHECK_THROWS_AS(render::representation_from_string("prose"), SchemaMismatch);
}
