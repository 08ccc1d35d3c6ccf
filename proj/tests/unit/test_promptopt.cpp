#include "doctest.h"
#include "valence/promptopt.hpp"

using namespace valence;
using L = ValenceLabel;

namespace {

LabeledChunk item(int i, const std::string& term, L gold) {
  LabeledChunk l;
  l.chunk.chunk_id = "c" + std::to_string(i);
  l.chunk.term_id = term;
  l.chunk.surface = term;
  l.chunk.window_text = "pt " + term + " " + std::to_string(i);
  l.gold = gold;
  return l;
}

OptOptions opts(std::vector<std::string> seeds) {
  OptOptions o;
  o.classify.verbalizer = builtin_presets().verbalizer("single_word");
  o.seed_instructions = std::move(seeds);
  return o;
}

}  // namespace

TEST_CASE("demo assembly layout") {
  const std::vector<Demo> demos = {{"Word: a [...] x [...]", L::kNeutral, "c1"}};
  CHECK(assemble_prompt(demos, "Q") == "Word: a [...] x [...]\nLabel: neutral\n\nQ");
  CHECK(assemble_prompt({}, "Q") == "Q");
  const PromptCandidate c{"id", "Classify", demos};
  CHECK(candidate_prompt(c, item(1, "calm", L::kNeutral).chunk, TemplateKind::kInstructionPrimed) ==
        "Word: a [...] x [...]\nLabel: neutral\n\nClassify. Word: calm [...] pt calm 1 [...]");
}

TEST_CASE("budget presets") {
  const OptBudget light = OptBudget::from_preset("light");
  CHECK(light.trials == 10);
  CHECK(light.n_candidate_demos == 8);
  CHECK(OptBudget::from_preset("heavy").trials == 50);
  CHECK_THROWS_AS(OptBudget::from_preset("extreme"), ValidationError);
}

TEST_CASE("demo bootstrapping keeps correctly labeled examples") {
  std::vector<LabeledChunk> train;
  for (int i = 0; i < 12; ++i) train.push_back(item(i, i % 2 ? "calm" : "angry", i % 2 ? L::kNeutral : L::kStigmatizing));
  MockBackend mock;  // uniform: always stigmatizing
  std::vector<std::string> warnings;
  const auto demos = bootstrap_demos(train, mock, 4, 1, "Classify", opts({"Classify"}), &warnings);
  CHECK(demos.size() == 4);
  for (const Demo& d : demos) CHECK(d.label == L::kStigmatizing);
  CHECK_THROWS_AS(bootstrap_demos({}, mock, 4, 1, "Classify", opts({"Classify"})), DomainError);
}

TEST_CASE("instruction proposals dedupe and skip failures") {
  MockBackend mock({{"Paraphrase", std::nullopt, "Label the tone", false}});
  const std::vector<std::string> seeds = {"Classify"};
  std::vector<std::string> warnings;
  const auto out = propose_instructions(seeds, mock, 3, &warnings);
  CHECK(out.front() == "Classify");
  CHECK(out.size() <= 4);
  MockBackend failing({{"", std::nullopt, std::nullopt, true}});
  std::vector<std::string> w2;
  CHECK(propose_instructions(seeds, failing, 2, &w2) == seeds);
  CHECK_FALSE(w2.empty());
}

TEST_CASE("optimizer result is seeded and serializable") {
  std::vector<LabeledChunk> train, dev;
  for (int i = 0; i < 20; ++i) (i % 2 ? dev : train).push_back(item(i, "calm", L::kNeutral));
  std::vector<MockRule> rules = {{"Good. Word: calm", WordLogits{{"negative", 0}, {"positive", 0}, {"neutral", 2}}, std::nullopt, false}};
  MockBackend a(rules), b(rules);
  const auto o = opts({"Bad", "Good"});
  const OptResult r1 = optimize(train, dev, OptBudget::from_preset("light", 3), a, o);
  const OptResult r2 = optimize(train, dev, OptBudget::from_preset("light", 3), b, o);
  CHECK(r1.best.instruction == "Good");
  CHECK(r1.dev_score == 1.0);
  CHECK(r1.baseline_score == 0.0);
  CHECK_FALSE(r1.no_improvement);
  CHECK(to_json(r1) == to_json(r2));
  CHECK(r1.trials.size() == 10);
}
