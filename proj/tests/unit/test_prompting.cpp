#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "valence/error.hpp"
#include "valence/prompting.hpp"
#include "valence/util/jsonl.hpp"
#include "valence/util/random.hpp"

using namespace valence;
using L = ValenceLabel;

namespace {

PromptTemplate tmpl(TemplateKind kind, std::string instruction = {}) {
  PromptTemplate t;
  t.kind = kind;
  t.instruction_text = std::move(instruction);
  return t;
}

}  // namespace

TEST_CASE("template layouts") {
  CHECK(render("pt calm", std::nullopt, tmpl(TemplateKind::kAnchored)) == "pt calm");
  CHECK(render("pt calm", "calm", tmpl(TemplateKind::kPrimed)) == "Word: calm [...] pt calm [...]");
  CHECK(render("pt calm", std::nullopt, tmpl(TemplateKind::kCloze)) == "pt calm This sentence is: [MASK]");
  CHECK(render("pt calm", "calm", tmpl(TemplateKind::kClozePrimed)) ==
        "pt calm Keyword is: calm. This sentence is: [MASK]");
  CHECK(render("pt calm", std::nullopt, tmpl(TemplateKind::kInstruction, "Classify")) == "Classify. pt calm");
  CHECK(render("pt calm", std::nullopt, tmpl(TemplateKind::kInstruction, "Classify it.")) == "Classify it. pt calm");
  CHECK(render("pt calm", "calm", tmpl(TemplateKind::kInstructionPrimed, "Classify")) ==
        "Classify. Word: calm [...] pt calm [...]");
  PromptTemplate custom = tmpl(TemplateKind::kCloze);
  custom.mask_token = "<mask>";
  CHECK(render("x", std::nullopt, custom) == "x This sentence is: <mask>");
}

TEST_CASE("primed templates need a keyword; instructions need text") {
  CHECK_THROWS_AS(render("x", std::nullopt, tmpl(TemplateKind::kPrimed)), ValidationError);
  CHECK_THROWS_AS(tmpl(TemplateKind::kInstruction).validate(), ValidationError);
  CHECK(is_primed(TemplateKind::kClozePrimed));
  CHECK_FALSE(is_primed(TemplateKind::kCloze));
  CHECK(is_cloze(TemplateKind::kCloze));
  for (auto k : {TemplateKind::kAnchored, TemplateKind::kPrimed, TemplateKind::kCloze, TemplateKind::kClozePrimed,
                 TemplateKind::kInstruction, TemplateKind::kInstructionPrimed}) {
    CHECK(parse_template_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_template_kind("prefix"), ValidationError);
}

TEST_CASE("verbalizer averages word logits per class") {
  const Verbalizer& multi = builtin_presets().verbalizer("multi_word");
  WordLogits logits;
  for (const auto& w : multi.all_words()) logits[w] = 0.0;
  logits["negative"] = 3.0;  // stigmatizing mean 1
  const ClassScores s = verbalize(logits, multi);
  const auto want = oracle::softmax({1.0, 0.0, 0.0});
  for (int k = 0; k < 3; ++k) CHECK(s.p[k] == doctest::Approx(want[k]).epsilon(1e-12));
  logits.erase("clinical");
  CHECK_THROWS_WITH_AS(verbalize(logits, multi), doctest::Contains("clinical"), DomainError);
}

TEST_CASE("verbalizer handles extreme logits") {
  const Verbalizer& v = builtin_presets().verbalizer("single_word");
  const ClassScores s = verbalize({{"negative", 1e6}, {"positive", -1e6}, {"neutral", 0}}, v);
  CHECK(std::isfinite(s.p[0]));
  CHECK(s.p[0] == doctest::Approx(1.0));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const ClassScores r = verbalize({{"negative", rng.uniform() * 50}, {"positive", rng.uniform() * 50},
                                     {"neutral", rng.uniform() * 50}},
                                    v);
    CHECK(r.p[0] + r.p[1] + r.p[2] == doctest::Approx(1.0));
  }
}

TEST_CASE("argmax tie order") {
  CHECK(argmax_label({{1.0 / 3, 1.0 / 3, 1.0 / 3}}) == L::kStigmatizing);
  CHECK(argmax_label({{0.2, 0.4, 0.4}}) == L::kPrivileging);
  CHECK(argmax_label({{0.1, 0.2, 0.7}}) == L::kNeutral);
}

TEST_CASE("generation post-processing takes the earliest label word") {
  CHECK(postprocess_generation("Label: Neutral") == L::kNeutral);
  CHECK(postprocess_generation("privileging, not stigmatizing") == L::kPrivileging);
  CHECK(postprocess_generation("STIGMATIZING") == L::kStigmatizing);
  CHECK_FALSE(postprocess_generation("unsure").has_value());
  CHECK_FALSE(postprocess_generation("").has_value());
}

TEST_CASE("verbalizer validation") {
  Verbalizer v{"x", {{{"a"}, {"b"}, {"a"}}}};
  CHECK_THROWS_AS(v.validate(), ValidationError);
  Verbalizer empty{"x", {{{"a"}, {}, {"c"}}}};
  CHECK_THROWS_AS(empty.validate(), ValidationError);
}

TEST_CASE("shipped presets file matches the built-in presets") {
  const PromptPresets file = load_presets(std::filesystem::path(VALENCE_SOURCE_DIR) / "config/presets.json");
  CHECK(presets_to_json(file) == presets_to_json(builtin_presets()));
  CHECK(presets_from_json(presets_to_json(builtin_presets())).instructions.size() ==
        builtin_presets().instructions.size());
  CHECK_FALSE(builtin_presets().instruction("human_primed").empty());
  CHECK_THROWS_AS(builtin_presets().instruction("nope"), ValidationError);
}
