// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1 for ctest).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "valence/agreement.hpp"
#include "valence/backends.hpp"
#include "valence/eval.hpp"
#include "valence/pipeline.hpp"
#include "valence/promptopt.hpp"
#include "valence/records.hpp"
#include "valence/synth.hpp"
#include "valence/util/hashing.hpp"
#include "valence/util/random.hpp"
#include "valence/util/utf8.hpp"

using namespace valence;

namespace {

const fs::path kSource = VALENCE_SOURCE_DIR;
const fs::path kTerms = kSource / "data/lexicon/terms.tsv";
const fs::path kRatings = kSource / "data/lexicon/ratings.tsv";

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

RatingTable table_of(const std::vector<std::vector<std::size_t>>& counts) {
  RatingTable t;
  t.counts = counts;
  for (std::size_t i = 0; i < counts.size(); ++i) t.items.push_back("i" + std::to_string(i));
  for (std::size_t k = 0; k < counts.front().size(); ++k) t.categories.push_back("c" + std::to_string(k));
  return t;
}

// All count vectors of q categories with total in [lo, hi].
std::vector<std::vector<std::size_t>> count_vectors(std::size_t q, std::size_t lo, std::size_t hi) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> v(q, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t k, std::size_t left) {
    if (k + 1 == q) {
      v[k] = left;
      out.push_back(v);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      v[k] = c;
      rec(k + 1, left - c);
    }
  };
  for (std::size_t total = lo; total <= hi; ++total) rec(0, total);
  return out;
}

// Calls fn on every multiset of `size` elements drawn from `pool`.
template <typename T, typename Fn>
void for_each_multiset(const std::vector<T>& pool, std::size_t size, Fn&& fn) {
  std::vector<std::size_t> idx(size, 0);
  std::vector<T> items(size);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t pos, std::size_t from) {
    if (pos == size) {
      fn(items);
      return;
    }
    for (std::size_t i = from; i < pool.size(); ++i) {
      items[pos] = pool[i];
      rec(pos + 1, i);
    }
  };
  rec(0, 0);
}

// 1. Agreement oracle.
Outcome criterion_agreement() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t tables = 0;
  double worst = 0.0;
  auto compare = [&](const std::vector<std::vector<std::size_t>>& counts) {
    const auto expected = oracle::ac1(counts);
    std::optional<double> got;
    try {
      got = gwet_ac(table_of(counts), WeightScheme::kIdentity);
    } catch (const DomainError&) {
    }
    ++tables;
    if (expected.has_value() != got.has_value()) {
      o.check(false, "definedness differs on table " + std::to_string(tables));
      return;
    }
    if (expected) {
      worst = std::max(worst, std::abs(*expected - *got));
      o.check(std::abs(*expected - *got) <= 1e-12, "AC1 mismatch " + fmt("%.3g", *expected - *got));
    }
  };
  for (std::size_t q = 2; q <= 3; ++q) {
    // Fixed rater count per table.
    for (std::size_t r = 2; r <= 4; ++r) {
      const auto vectors = count_vectors(q, r, r);
      for (std::size_t n = 1; n <= 6; ++n) for_each_multiset(vectors, n, compare);
    }
    // Mixed rater counts, including single-rater items.
    const auto mixed = count_vectors(q, 1, 4);
    for (std::size_t n = 1; n <= (q == 2 ? 6u : 4u); ++n) for_each_multiset(mixed, n, compare);
  }
  const double ac = gwet_ac(table_of({{2, 0}, {0, 2}, {1, 1}, {1, 1}}), WeightScheme::kIdentity);
  o.check(ac == 0.0, "hand-derived table gives " + fmt("%.17g", ac));
  const double elapsed = seconds_since(t0);
  o.check(elapsed < 10.0, "took " + fmt("%.2f s", elapsed));
  if (o.pass) {
    o.detail = std::to_string(tables) + " tables, max |diff| " + fmt("%.1e", worst) + ", " + fmt("%.2f s", elapsed);
  }
  return o;
}

// 2. Verbalizer math.
Outcome criterion_verbalizer() {
  Outcome o;
  const Verbalizer& v = builtin_presets().verbalizer("single_word");
  auto scores = [&](double neg, double pos, double neu) {
    return verbalize({{"negative", neg}, {"positive", pos}, {"neutral", neu}}, v);
  };
  const auto expected = oracle::softmax({2.0, 0.0, 0.0});
  const ClassScores s = scores(2, 0, 0);
  for (int k = 0; k < 3; ++k) o.check(std::abs(s.p[k] - expected[k]) <= 1e-9, "softmax(2,0,0) mismatch");
  const ClassScores u = scores(1, 1, 1);
  for (int k = 0; k < 3; ++k) o.check(std::abs(u.p[k] - 1.0 / 3.0) <= 1e-9, "uniform logits not uniform");
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform() * 20 - 10, b = rng.uniform() * 20 - 10, c = rng.uniform() * 20 - 10;
    const double shift = rng.uniform() * 200 - 100;
    const ClassScores x = scores(a, b, c);
    const ClassScores y = scores(a + shift, b + shift, c + shift);
    for (int k = 0; k < 3; ++k) o.check(std::abs(x.p[k] - y.p[k]) <= 1e-9, "shift invariance broken");
  }
  if (o.pass) o.detail = "softmax(2,0,0) = " + fmt("%.5f", s.p[0]) + ", 100 shifted triples";
  return o;
}

std::vector<Chunk> synthetic_chunks(std::size_t n_notes, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_notes = n_notes;
  const Lexicon lex = load_lexicon(kTerms);
  const SynthCorpus corpus = synth_corpus(spec, lex.terms, seed);
  return extract_all(corpus.notes, compile_matchers(lex.terms));
}

// 3. Template fidelity.
Outcome criterion_templates() {
  Outcome o;
  const auto chunks = synthetic_chunks(20, 3);
  o.check(chunks.size() >= 20, "fewer than 20 chunks");
  PromptTemplate cloze, primed;
  cloze.kind = TemplateKind::kCloze;
  primed.kind = TemplateKind::kClozePrimed;
  std::size_t n = 0;
  for (const Chunk& c : chunks) {
    if (n == 20) break;
    const std::string word = chunk_keyword(c);
    o.check(render_chunk(c, cloze) == c.window_text + " This sentence is: [MASK]", "cloze differs for " + c.chunk_id);
    o.check(render_chunk(c, primed) == c.window_text + " Keyword is: " + word + ". This sentence is: [MASK]",
            "cloze_primed differs for " + c.chunk_id);
    ++n;
  }
  PromptTemplate t = primed;
  o.check(render("pt is compliant", "compliant", t) ==
              "pt is compliant Keyword is: compliant. This sentence is: [MASK]",
          "worked example differs");
  if (o.pass) o.detail = std::to_string(n) + " chunks x 2 templates byte-identical";
  return o;
}

// 4. Extraction.
Outcome criterion_extraction() {
  Outcome o;
  const Lexicon lex = load_lexicon(kTerms);
  const auto matchers = compile_matchers(lex.terms);
  std::map<std::string, const Matcher*> by_term;
  for (const Matcher& m : matchers) by_term[m.term_id()] = &m;

  // Random notes mixing filler, accented words and keywords.
  const std::vector<std::string> filler = {"pt", "seen", "today", "café", "naïve", "résumé", "BP", "stable",
                                          "___", "plan:", "f/u", "x2", "Ünit", "noted", "-", "(ok)"};
  Rng rng(77);
  std::vector<SourceNote> notes;
  for (std::size_t i = 0; i < 1000; ++i) {
    std::string text;
    const std::size_t words = 1 + static_cast<std::size_t>(rng.below(i % 3 == 0 ? 12 : 160));
    for (std::size_t w = 0; w < words; ++w) {
      if (!text.empty()) text += ' ';
      if (rng.below(8) == 0) {
        const LexiconTerm& t = lex.terms[static_cast<std::size_t>(rng.below(lex.terms.size()))];
        std::string v = t.variants[static_cast<std::size_t>(rng.below(t.variants.size()))];
        if (rng.below(2)) v[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(v[0])));
        text += v;
      } else {
        text += filler[static_cast<std::size_t>(rng.below(filler.size()))];
      }
    }
    notes.push_back({"n" + std::to_string(i), "synthetic", "obgyn", text});
  }
  std::size_t checked = 0;
  for (const SourceNote& note : notes) {
    const std::size_t len = utf8::length(note.text);
    for (const KeywordMatch& m : find_matches(note, matchers)) {
      const Chunk c = extract_chunk(note, m, kDefaultWindow);
      ++checked;
      const std::size_t want_start = m.start > kDefaultWindow ? m.start - kDefaultWindow : 0;
      const std::size_t want_end = std::min(len, m.end + kDefaultWindow);
      o.check(c.source_start == want_start && c.source_end == want_end, "window bounds wrong in " + note.note_id);
      o.check(c.window_text == utf8::substr(note.text, want_start, want_end), "window text wrong in " + note.note_id);
      bool found = false;
      for (const MatchSpan& s : by_term.at(c.term_id)->find_all_utf8(c.window_text)) {
        found |= s.start == c.anchor_start && s.end == c.anchor_end;
      }
      o.check(found, "anchor not re-matched in " + c.chunk_id);
      o.check(utf8::substr(c.window_text, c.anchor_start, c.anchor_end) == c.surface, "surface mismatch " + c.chunk_id);
    }
  }
  o.check(checked > 1000, "too few matches exercised");

  // Truncation at both note edges.
  const std::string body(300, 'x');
  const SourceNote left{"L", "t", "s", "x " + std::string("compliant") + " " + body + body};
  const SourceNote right{"R", "t", "s", body + body + " compliant."};
  const Matcher& compliance = *by_term.at("t01");
  const auto lm = find_matches(left, std::span(&compliance, 1));
  const auto rm = find_matches(right, std::span(&compliance, 1));
  o.check(lm.size() == 1 && rm.size() == 1, "edge notes should match once");
  if (lm.size() == 1 && rm.size() == 1) {
    const Chunk lc = extract_chunk(left, lm[0]);
    const Chunk rc = extract_chunk(right, rm[0]);
    o.check(lc.source_start == 0 && lc.anchor_start == 2 && lc.source_end == lm[0].end + 200, "left edge");
    o.check(rc.source_end == utf8::length(right.text) && rc.source_start == rm[0].start - 200, "right edge");
  }

  // Compliance example.
  LexiconTerm term{"compliance", "compliance", {"noncompliant", "noncompliance", "poor compliance", "compliant"}, ""};
  const Matcher m = Matcher::compile(term);
  auto surfaces = [&](const std::string& text) {
    std::vector<std::string> out;
    for (const MatchSpan& s : m.find_all_utf8(text)) out.push_back(utf8::substr(text, s.start, s.end));
    return out;
  };
  o.check(surfaces("pt is compliant.") == std::vector<std::string>{"compliant"}, "positive case");
  o.check(surfaces("Poor Compliance noted") == std::vector<std::string>{"Poor Compliance"}, "multi-word case");
  o.check(surfaces("compliant and noncompliant") == std::vector<std::string>{"compliant", "noncompliant"},
          "two-match case");
  o.check(surfaces("decompliant").empty(), "negative case decompliant");
  o.check(surfaces("compliants compliance").empty(), "negative case suffix");
  if (o.pass) o.detail = std::to_string(checked) + " chunks round-tripped over 1000 notes";
  return o;
}

// 5. Metrics oracle.
Outcome criterion_metrics() {
  Outcome o;
  std::vector<std::pair<int, int>> cells;
  for (int g = 0; g < 3; ++g) {
    for (int p = 0; p < 4; ++p) cells.emplace_back(g, p);
  }
  std::size_t sets = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    for_each_multiset(cells, n, [&](const std::vector<std::pair<int, int>>& rows) {
      std::vector<PredictionRow> preds;
      for (const auto& [g, p] : rows) {
        preds.push_back({"", static_cast<ValenceLabel>(g),
                         p == 3 ? Predicted{} : Predicted{static_cast<ValenceLabel>(p)}});
      }
      const MacroMetrics mm = macro_metrics(preds);
      const oracle::MacroTally t = oracle::macro_tally(rows);
      ++sets;
      bool ok = std::abs(mm.f1 - t.macro_f1.value()) <= 1e-12 &&
                std::abs(mm.precision - t.macro_precision.value()) <= 1e-12 &&
                std::abs(mm.recall - t.macro_recall.value()) <= 1e-12 &&
                std::abs(mm.accuracy - t.accuracy.value()) <= 1e-12;
      for (int k = 0; k < 3; ++k) {
        ok = ok && std::abs(mm.per_class[k].f1 - t.f1[k].value()) <= 1e-12 &&
             std::abs(mm.per_class[k].precision - t.precision[k].value()) <= 1e-12 &&
             std::abs(mm.per_class[k].recall - t.recall[k].value()) <= 1e-12;
      }
      o.check(ok, "mismatch on a set of size " + std::to_string(n));
    });
  }
  const std::vector<std::pair<int, int>> hand = {{0, 0}, {0, 1}, {1, 1}, {2, 2}};
  const oracle::MacroTally t = oracle::macro_tally(hand);
  o.check(t.macro_f1 == oracle::Rational{7, 9}, "oracle disagrees with 7/9");
  std::vector<PredictionRow> rows;
  for (const auto& [g, p] : hand) rows.push_back({"", static_cast<ValenceLabel>(g), static_cast<ValenceLabel>(p)});
  const double f1 = macro_metrics(rows).f1;
  o.check(std::abs(f1 - 7.0 / 9.0) <= 1e-15, "hand example gives " + fmt("%.17g", f1));
  if (o.pass) o.detail = std::to_string(sets) + " prediction sets; hand example " + fmt("%.12f", f1);
  return o;
}

std::vector<PredictionRow> random_rows(std::size_t n, double p_correct, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto gold = static_cast<ValenceLabel>(rng.below(3));
    const auto other = static_cast<ValenceLabel>((index_of(gold) + 1 + rng.below(2)) % 3);
    rows.push_back({std::to_string(i), gold, rng.uniform() < p_correct ? gold : other});
  }
  return rows;
}

// 6. Bootstrap.
Outcome criterion_bootstrap() {
  Outcome o;
  std::vector<PredictionRow> perfect;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto l = static_cast<ValenceLabel>(i % 3);
    perfect.push_back({std::to_string(i), l, l});
  }
  const BootstrapResult b = bootstrap(perfect, macro_f1, 1000, 42);
  o.check(b.ci_low == 1.0 && b.ci_high == 1.0 && b.mean == 1.0, "all-correct CI not [1,1]");

  const auto rows = random_rows(1000, 0.8, 5);
  const auto t0 = std::chrono::steady_clock::now();
  const BootstrapResult ref = bootstrap(rows, macro_f1, 1000, 42, 1);
  const double single = seconds_since(t0);
  for (std::size_t threads : {1u, 2u, 4u, 8u, 0u}) {
    const BootstrapResult r = bootstrap(rows, macro_f1, 1000, 42, threads);
    o.check(r.ci_low == ref.ci_low && r.ci_high == ref.ci_high && r.mean == ref.mean,
            "CI differs at " + std::to_string(threads) + " threads");
  }
  o.check(single < 5.0, "1000 replicates on n=1000 took " + fmt("%.2f s", single));
  if (o.pass) {
    o.detail = "CI [" + fmt("%.4f", ref.ci_low) + ", " + fmt("%.4f", ref.ci_high) + "] stable across threads, " +
               fmt("%.2f s", single) + " single-threaded";
  }
  return o;
}

// 7. Baseline learner.
Outcome criterion_baseline() {
  Outcome o;
  Rng rng(11);
  double worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    FeatureConfig fc;
    fc.dim = 4 + static_cast<std::size_t>(rng.below(29));
    BaselineModel model = BaselineModel::zeros(fc);
    for (double& w : model.weights) w = rng.uniform() * 2 - 1;
    for (double& b : model.bias) b = rng.uniform() * 2 - 1;
    std::vector<Example> ex;
    for (int i = 0; i < 10; ++i) {
      Example e;
      for (std::uint32_t j = 0; j < fc.dim; ++j) {
        if (rng.below(3) == 0) e.x.emplace_back(j, 1.0 + static_cast<double>(rng.below(3)));
      }
      e.y = static_cast<ValenceLabel>(rng.below(3));
      ex.push_back(std::move(e));
    }
    const Gradient g = cross_entropy_gradient(model, ex);
    const double h = 1e-5;
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
      const double keep = model.weights[j];
      model.weights[j] = keep + h;
      const double up = cross_entropy(model, ex);
      model.weights[j] = keep - h;
      const double down = cross_entropy(model, ex);
      model.weights[j] = keep;
      const double r = rel(g.weights[j], (up - down) / (2 * h));
      worst = std::max(worst, r);
    }
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const double keep = model.bias[k];
      model.bias[k] = keep + h;
      const double up = cross_entropy(model, ex);
      model.bias[k] = keep - h;
      const double down = cross_entropy(model, ex);
      model.bias[k] = keep;
      worst = std::max(worst, rel(g.bias[k], (up - down) / (2 * h)));
    }
  }
  o.check(worst <= 1e-4, "gradient relative error " + fmt("%.2e", worst));

  // Seeded synthetic corpus: first 300 chunks train, next 100 test.
  SynthSpec spec;
  spec.n_notes = 400;
  const Lexicon lex = load_lexicon(kTerms);
  const SynthCorpus corpus = synth_corpus(spec, lex.terms, 42);
  const auto labeled = label_chunks(extract_all(corpus.notes, compile_matchers(lex.terms)), corpus.gold);
  PromptTemplate tmpl;
  tmpl.kind = TemplateKind::kClozePrimed;
  const auto prompts = render_training_set(labeled, tmpl);
  o.check(prompts.size() == 400, "expected 400 chunks");
  const std::span<const LabeledPrompt> train(prompts.data(), 300);
  const std::span<const LabeledPrompt> test(prompts.data() + 300, prompts.size() - 300);
  TrainConfig cfg;
  const BaselineModel a = train_baseline(train, cfg);
  const BaselineModel b = train_baseline(train, cfg);
  o.check(a == b, "identical seeds gave different models");
  o.check(sha256_hex(model_to_json(a).dump()) == sha256_hex(model_to_json(b).dump()), "model files differ");
  std::vector<PredictionRow> rows;
  for (const LabeledPrompt& p : test) rows.push_back({"", p.gold, a.predict(p.prompt)});
  const double f1 = macro_f1(rows);
  o.check(f1 >= 0.95, "test macro-F1 " + fmt("%.4f", f1));
  if (o.pass) o.detail = "max grad rel err " + fmt("%.1e", worst) + ", test macro-F1 " + fmt("%.4f", f1);
  return o;
}

// 8. Lexicon threshold.
Outcome criterion_lexicon() {
  Outcome o;
  o.check(within_threshold({10, 4}, 2.5), "mean 2.5 excluded");
  o.check(!within_threshold({2'500'000'001, 1'000'000'000}, 2.5), "mean 2.5 + 1e-9 included");
  o.check(!within_threshold({10, 4}, 2.5 - 1e-9), "threshold 2.5 - 1e-9 admits 2.5");
  auto rate = [](Valence v, std::vector<int> scores) {
    std::vector<TermRating> out;
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({"t", "r" + std::to_string(i), v, scores[i]});
    return out;
  };
  const auto boundary = aggregate_term("t", rate(Valence::kStigmatizing, {2, 2, 3, 3}));
  o.check(boundary.stigmatizing && boundary.included, "[2,2,3,3] not assigned");
  auto both = rate(Valence::kStigmatizing, {1, 1, 2, 1});
  const auto priv = rate(Valence::kPrivileging, {2, 1, 2, 2});
  both.insert(both.end(), priv.begin(), priv.end());
  const ValenceAssignment a = aggregate_term("t", both);
  o.check(a.stigmatizing && a.privileging, "dual valence not assigned");
  o.check(a.stigmatizing_mean && *a.stigmatizing_mean == ExactMean{5, 4}, "stigmatizing mean not 1.25");
  o.check(a.privileging_mean && *a.privileging_mean == ExactMean{7, 4}, "privileging mean not 1.75");
  if (o.pass) o.detail = "2.5 in, 2.5+1e-9 out, dual valence 1.25/1.75";
  return o;
}

LabeledChunk opt_chunk(const std::string& id, const std::string& term, const std::string& text, ValenceLabel gold) {
  LabeledChunk l;
  l.chunk.chunk_id = id;
  l.chunk.note_id = id;
  l.chunk.term_id = term;
  l.chunk.surface = term;
  l.chunk.window_text = text;
  const auto pos = text.find(term);
  l.chunk.anchor_start = utf8::length(text.substr(0, pos));
  l.chunk.anchor_end = l.chunk.anchor_start + utf8::length(term);
  l.chunk.source_end = utf8::length(text);
  l.chunk.corpus_tag = "synthetic";
  l.gold = gold;
  return l;
}

// 9. Optimizer.
Outcome criterion_optimizer() {
  Outcome o;
  const std::string weak = "Classify the tone of the keyword";
  const std::string strong = "Decide whether the keyword is stigmatizing, privileging or neutral";
  std::vector<LabeledChunk> train, dev;
  const std::vector<std::pair<std::string, ValenceLabel>> terms = {
      {"angry", ValenceLabel::kStigmatizing}, {"happy", ValenceLabel::kPrivileging}, {"form", ValenceLabel::kNeutral}};
  for (int i = 0; i < 30; ++i) {
    const auto& [term, label] = terms[static_cast<std::size_t>(i) % 3];
    const std::string text = "Note " + std::to_string(i) + ": patient " + term + " at visit " + std::to_string(i * 7);
    (i % 2 ? dev : train).push_back(opt_chunk("c" + std::to_string(i), term, text, label));
  }
  // Only the strong instruction is answered; everything else gets uniform logits.
  std::vector<MockRule> rules;
  const std::map<ValenceLabel, WordLogits> logits = {
      {ValenceLabel::kStigmatizing, {{"negative", 3}, {"positive", 0}, {"neutral", 0}}},
      {ValenceLabel::kPrivileging, {{"negative", 0}, {"positive", 3}, {"neutral", 0}}},
      {ValenceLabel::kNeutral, {{"negative", 0}, {"positive", 0}, {"neutral", 3}}}};
  for (const auto& [term, label] : terms) {
    rules.push_back({strong + ". Word: " + term, logits.at(label), std::nullopt, false});
  }
  OptOptions options;
  options.kind = TemplateKind::kInstructionPrimed;
  options.classify.verbalizer = builtin_presets().verbalizer("single_word");
  options.seed_instructions = {weak, strong};

  std::size_t selected = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MockBackend backend(rules);
    const OptResult r = optimize(train, dev, OptBudget::from_preset("light", seed), backend, options);
    selected += r.best.instruction == strong && r.dev_score == 1.0 && !r.no_improvement;
  }
  o.check(selected == 100, "dominant candidate selected in " + std::to_string(selected) + "/100 runs");

  MockBackend flat;
  const OptResult tie = optimize(train, dev, OptBudget::from_preset("light", 7), flat, options);
  o.check(tie.no_improvement, "no-improvement flag not raised when all candidates tie");
  if (o.pass) o.detail = "selected 100/100; tie flagged (dev " + fmt("%.3f", tie.dev_score) + ")";
  return o;
}

// 10. End-to-end.
Outcome criterion_end_to_end() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("valence-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  PipelineConfig cfg;
  cfg.lexicon_terms = kTerms;
  cfg.lexicon_ratings = kRatings;
  cfg.synth.n_notes = 300;

  cfg.out_dir = root / "a";
  const auto t0 = std::chrono::steady_clock::now();
  const Manifest first = run_pipeline(cfg);
  const double elapsed = seconds_since(t0);
  cfg.out_dir = root / "b";
  const Manifest second = run_pipeline(cfg);
  o.check(elapsed < 60.0, "pipeline took " + fmt("%.1f s", elapsed));
  o.check(first.stages.size() == 8, "manifest has " + std::to_string(first.stages.size()) + " stages");
  bool same = first.stages.size() == second.stages.size();
  for (std::size_t i = 0; same && i < first.stages.size(); ++i) {
    same = first.stages[i].outputs == second.stages[i].outputs && first.stages[i].inputs == second.stages[i].inputs;
  }
  o.check(same, "re-run produced different artifact hashes");

  const RunLayout a{root / "a"};
  const auto sizes = read_jsonl(a.train()).header.at("sizes");
  const std::size_t tr = sizes.at("train"), dv = sizes.at("dev"), te = sizes.at("test");
  o.check(tr == 180 && dv == 60 && te == 60,
          "split (" + std::to_string(tr) + ", " + std::to_string(dv) + ", " + std::to_string(te) + ")");

  // Cross-domain arithmetic through the report stage.
  EvalReport in_domain, external;
  in_domain.metrics.f1 = 0.9572;
  external.metrics.f1 = 0.5358;
  write_json(root / "in_domain.json", to_json(in_domain));
  write_json(root / "external.json", to_json(external));
  const ReportInputs in{root / "in_domain.json", a.predictions(), a.test(), kTerms, kRatings, root / "external.json"};
  stage_report(in, {root / "xd_report.json", root / "xd_plot.csv"}, {1, "x"});
  std::optional<double> drop;
  const Json xd = read_json(root / "xd_report.json");
  for (const Json& d : xd.at("cross_domain")) {
    if (d.at("metric") == "macro_f1") drop = d.at("relative_drop").get<double>();
  }
  o.check(drop && std::abs(*drop - 0.44) < 0.005, "macro-F1 drop " + (drop ? fmt("%.4f", *drop) : "missing"));
  fs::remove_all(root);
  if (o.pass) {
    o.detail = fmt("%.2f s", elapsed) + ", split (180, 60, 60), hashes reproduced, drop " + fmt("%.4f", *drop);
  }
  return o;
}

// 11. Valence shift fixtures.
Outcome criterion_valence_shift() {
  Outcome o;
  const fs::path dir = kSource / "tests/fixtures/valence_shift";
  const Lexicon lex = load_lexicon(dir / "terms.tsv", dir / "ratings.tsv");
  const auto assignments = score_lexicon(lex, LexiconConfig{});
  const auto labeled = from_json_records(read_jsonl(dir / "labeled.jsonl").records, labeled_from_json, "fixture");
  const ValenceShiftReport r = valence_shift(assignments, labeled);
  std::map<std::string, ShiftEntry> by_term;
  for (const ShiftEntry& e : r.entries) by_term[e.term_id] = e;
  o.check(by_term.count("t06") && by_term.count("t07"), "fixture terms missing from report");
  if (o.pass) {
    const ShiftEntry& happy = by_term["t06"];
    const ShiftEntry& angry = by_term["t07"];
    o.check(happy.assigned_privileging && !happy.assigned_stigmatizing, "happy not assigned privileging");
    o.check(happy.polarity_flip && happy.new_neutral && !happy.new_polarity, "happy flags wrong");
    o.check(angry.assigned_stigmatizing && !angry.assigned_privileging, "angry not assigned stigmatizing");
    o.check(!angry.polarity_flip && !angry.new_neutral && !angry.new_polarity, "angry flagged");
  }
  if (o.pass) o.detail = "happy: polarity flip + new neutral; angry: no flags";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"agreement oracle", criterion_agreement},
      {"verbalizer math", criterion_verbalizer},
      {"template fidelity", criterion_templates},
      {"extraction", criterion_extraction},
      {"metrics oracle", criterion_metrics},
      {"bootstrap", criterion_bootstrap},
      {"baseline learner", criterion_baseline},
      {"lexicon threshold", criterion_lexicon},
      {"optimizer", criterion_optimizer},
      {"end-to-end", criterion_end_to_end},
      {"valence shift", criterion_valence_shift},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  [%zu] %-18s %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
