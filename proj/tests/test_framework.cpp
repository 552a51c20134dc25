#include <algorithm>

#include "doctest.h"
#include "support.hpp"
#include "valuelens/framework.hpp"

using namespace valuelens;
using namespace valuelens::framework;

namespace {

const char* const kGoldenSentence =
    "The system reduces the risk of data breaches for hospital patients.";

FrameworkSpec one_exemplar_spec() {
  FrameworkSpec s;
  s.task_specification = "Classify the sentence.";
  s.exemplars.push_back({"A pump moves water.", Label::no_pve, "It is mechanical. " + canonical_suffix(Label::no_pve)});
  return s;
}

bool any_contains(const std::vector<std::string>& v, const std::string& s) {
  return std::any_of(v.begin(), v.end(), [&](const std::string& m) { return m.find(s) != std::string::npos; });
}

}  // namespace

TEST_SUITE("framework") {
  TEST_CASE("labels resolve from every spelling") {
    CHECK(resolve_label("No-PVE") == Label::no_pve);
    CHECK(resolve_label("NO PVE") == Label::no_pve);
    CHECK(resolve_label("direct pve") == Label::d_pve);
    CHECK(resolve_label("C_PVE") == Label::c_pve);
    CHECK_FALSE(resolve_label("maybe"));
  }

  TEST_CASE("default framework is valid and complete") {
    const auto spec = default_framework();
    CHECK(validation_errors(spec).empty());
    CHECK(spec.exemplars.size() == 14);
    CHECK(spec.cot_trigger == kDefaultCotTrigger);
    for (Label l : kLabels) {
      CHECK(std::any_of(spec.exemplars.begin(), spec.exemplars.end(),
                        [&](const Exemplar& e) { return e.label == l; }));
    }
    std::vector<std::string> ids;
    for (const auto& h : spec.heuristics) {
      ids.push_back(h.id);
      CHECK((h.id[0] == 'P') == (h.polarity == Polarity::positive));
    }
    CHECK(ids == std::vector<std::string>{"P1", "P2", "N1", "N2", "N3"});
    const auto first = std::find_if(spec.exemplars.begin(), spec.exemplars.end(), [](const Exemplar& e) {
      return e.sentence.rfind("an inventive solution to the need to prevent private information inferencing", 0) == 0;
    });
    REQUIRE(first != spec.exemplars.end());
    CHECK(first->label == Label::d_pve);
  }

  TEST_CASE("prompt has one pair per exemplar around system and target turns") {
    const auto spec = one_exemplar_spec();
    const auto msgs = assemble_prompt(spec, "Target here.");
    REQUIRE(msgs.size() == 4);
    CHECK(msgs[0].role == Role::system);
    CHECK(msgs[1] == Message{Role::user, "Sentence: A pump moves water."});
    CHECK(msgs[2].role == Role::assistant);
    CHECK(msgs[2].content.rfind(std::string(kDefaultCotTrigger) + " ", 0) == 0);
    CHECK(msgs[3] == Message{Role::user, "Sentence: Target here."});
    CHECK(assemble_prompt(default_framework(), "x").size() == 30);
  }

  TEST_CASE("system message omits empty blocks") {
    auto spec = one_exemplar_spec();
    CHECK(system_message(spec) == "Classify the sentence.");
    spec.behavior_corrections = {"Do not guess."};
    const auto sys = system_message(spec);
    CHECK(sys.find("BEHAVIOR CORRECTIONS") != std::string::npos);
    CHECK(sys.find("DEFINITIONS") == std::string::npos);
    CHECK(sys.find("- Do not guess.") != std::string::npos);
  }

  TEST_CASE("every prompt component appears verbatim in the messages") {
    const auto spec = default_framework();
    const auto msgs = assemble_prompt(spec, kGoldenSentence);
    std::string all;
    for (const auto& m : msgs) all += m.content + "\n";
    CHECK(all.find(spec.task_specification) != std::string::npos);
    for (const auto& d : spec.definitions) CHECK(all.find(d.text) != std::string::npos);
    for (const auto& c : spec.behavior_corrections) CHECK(all.find(c) != std::string::npos);
    for (const auto& h : spec.heuristics) CHECK(all.find(h.text) != std::string::npos);
    for (const auto& e : spec.exemplars) {
      CHECK(all.find(e.sentence) != std::string::npos);
      CHECK(all.find(e.rationale) != std::string::npos);
    }
  }

  TEST_CASE("exemplar labels are recoverable from assistant turns") {
    const auto spec = default_framework();
    const auto msgs = assemble_prompt(spec, kGoldenSentence);
    std::size_t k = 0;
    for (const auto& m : msgs) {
      if (m.role != Role::assistant) continue;
      REQUIRE(k < spec.exemplars.size());
      const auto want = spec.exemplars[k++].label;
      const auto suffix = canonical_suffix(want);
      CHECK(m.content.size() >= suffix.size());
      CHECK(m.content.compare(m.content.size() - suffix.size(), suffix.size(), suffix) == 0);
    }
    CHECK(k == spec.exemplars.size());
  }

  TEST_CASE("prompt matches the frozen golden file") {
    const auto msgs = assemble_prompt(default_framework(), kGoldenSentence);
    CHECK(messages_to_json(msgs).dump(2) + "\n" ==
          testing::read_text(testing::source_dir() / "golden" / "default_prompt.json"));
  }

  TEST_CASE("validation reports every problem") {
    FrameworkSpec s;
    s.exemplars.push_back({"", Label::d_pve, "Reasons. " + canonical_suffix(Label::no_pve)});
    s.heuristics.push_back({"P1", Polarity::negative, "x"});
    s.heuristics.push_back({"P1", Polarity::positive, "y"});
    const auto p = validation_errors(s);
    CHECK(any_contains(p, "task_specification is empty"));
    CHECK(any_contains(p, "exemplar 1: sentence is empty"));
    CHECK(any_contains(p, "suffix says \"No PVE\""));
    CHECK(any_contains(p, "duplicate heuristic id P1"));
    CHECK(any_contains(p, "must be positive"));
    CHECK(any_contains(p, "no exemplar for label C_PVE"));
    CHECK_THROWS_AS(validate(s), ValidationError);
  }

  TEST_CASE("JSON round-trip preserves the spec") {
    const auto spec = default_framework();
    CHECK(from_json(to_json(spec)) == spec);
    const auto msgs = assemble_prompt(spec, "abc");
    CHECK(messages_from_json(messages_to_json(msgs)) == msgs);
  }

  TEST_CASE("schema errors are collected") {
    try {
      from_json(json{{"task_specification", 3}, {"exemplars", json::array({json{{"label", "D_PVE"}}})}});
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      CHECK(e.problems().size() >= 2);
    }
    CHECK_THROWS_AS(from_json(json::array()), ValidationError);
  }

  TEST_CASE("load_framework rejects invalid files") {
    testing::TempDir dir;
    testing::write_text(dir / "f.json", "{not json");
    CHECK_THROWS_AS(load_framework(dir / "f.json"), ValidationError);
    testing::write_text(dir / "g.json", to_json(one_exemplar_spec()).dump());
    CHECK_THROWS_AS(load_framework(dir / "g.json"), ValidationError);
    testing::write_text(dir / "h.json", std::string(default_framework_json()));
    CHECK(load_framework(dir / "h.json") == default_framework());
  }

  TEST_CASE("prompt hash depends on model and content") {
    const auto m = assemble_prompt(one_exemplar_spec(), "a");
    CHECK(prompt_hash("gpt-4", m) == prompt_hash("gpt-4", m));
    CHECK(prompt_hash("gpt-4", m) != prompt_hash("gpt-3.5", m));
    CHECK(prompt_hash("gpt-4", m) != prompt_hash("gpt-4", assemble_prompt(one_exemplar_spec(), "b")));
    CHECK(prompt_hash("m", m).size() == 64);
  }
}
