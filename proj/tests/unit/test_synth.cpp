#include <map>

#include "doctest.h"
#include "valence/synth.hpp"

using namespace valence;

namespace {

const Lexicon& lexicon() {
  static const Lexicon lex = load_lexicon(std::filesystem::path(VALENCE_SOURCE_DIR) / "data/lexicon/terms.tsv");
  return lex;
}

}  // namespace

TEST_CASE("label counts follow the mix by largest remainder") {
  const auto c = synth_label_counts(300, kReferenceLabelMix);
  CHECK(c[0] + c[1] + c[2] == 300);
  const double sum = kReferenceLabelMix[0] + kReferenceLabelMix[1] + kReferenceLabelMix[2];
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    CHECK(std::abs(static_cast<double>(c[k]) - 300.0 * kReferenceLabelMix[k] / sum) < 1.0);
  }
  CHECK(synth_label_counts(3, {1, 1, 1}) == std::array<std::size_t, 3>{1, 1, 1});
}

TEST_CASE("every synthetic note holds exactly one lexicon match") {
  SynthSpec spec;
  spec.n_notes = 200;
  const SynthCorpus corpus = synth_corpus(spec, lexicon().terms, 11);
  REQUIRE(corpus.notes.size() == 200);
  const auto matchers = compile_matchers(lexicon().terms);
  for (std::size_t i = 0; i < corpus.notes.size(); ++i) {
    const auto matches = find_matches(corpus.notes[i], matchers);
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].term_id == corpus.gold[i].term_id);
    CHECK(corpus.gold[i].note_id == corpus.notes[i].note_id);
    CHECK(validate_deid(corpus.notes[i].text).violations.empty());
  }
}

TEST_CASE("synthesis is deterministic per seed") {
  SynthSpec spec;
  spec.n_notes = 30;
  const SynthCorpus a = synth_corpus(spec, lexicon().terms, 5);
  const SynthCorpus b = synth_corpus(spec, lexicon().terms, 5);
  const SynthCorpus c = synth_corpus(spec, lexicon().terms, 6);
  for (std::size_t i = 0; i < a.notes.size(); ++i) CHECK(a.notes[i].text == b.notes[i].text);
  bool differs = false;
  for (std::size_t i = 0; i < a.notes.size(); ++i) differs |= a.notes[i].text != c.notes[i].text;
  CHECK(differs);
}

TEST_CASE("chunks join with note gold") {
  SynthSpec spec;
  spec.n_notes = 20;
  const SynthCorpus corpus = synth_corpus(spec, lexicon().terms, 1);
  const auto chunks = extract_all(corpus.notes, compile_matchers(lexicon().terms));
  const auto labeled = label_chunks(chunks, corpus.gold);
  REQUIRE(labeled.size() == 20);
  for (std::size_t i = 0; i < labeled.size(); ++i) CHECK(labeled[i].gold == corpus.gold[i].label);
  CHECK_THROWS_AS(label_chunks(chunks, std::span(corpus.gold.data(), 5)), ValidationError);
}

TEST_CASE("spec validation") {
  SynthSpec spec;
  spec.mix = {0, 0, 0};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = SynthSpec{};
  spec.mix = {-1, 1, 1};
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  spec = SynthSpec{};
  spec.min_filler = 5;
  spec.max_filler = 2;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
  CHECK_NOTHROW(builtin_frames().validate());
}
