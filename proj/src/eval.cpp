#include "valence/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "valence/error.hpp"
#include "valence/util/random.hpp"

namespace valence {

namespace {

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::size_t column_of(const Predicted& p) {
  return p ? index_of(*p) : kUnparseableColumn;
}

std::string format_mean(const std::optional<ExactMean>& m) {
  if (!m) return "";
  std::ostringstream ss;
  ss << std::setprecision(6) << m->value();
  return ss.str();
}

}  // namespace

void PredictionSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const PredictionRow& r : rows) {
    if (!seen.insert(r.chunk_id).second) {
      throw ValidationError("duplicate chunk_id '" + r.chunk_id + "' in prediction set");
    }
  }
}

ConfusionMatrix confusion(std::span<const PredictionRow> rows) {
  ConfusionMatrix m{};
  for (const PredictionRow& r : rows) ++m[index_of(r.gold)][column_of(r.predicted)];
  return m;
}

MacroMetrics macro_metrics(const ConfusionMatrix& m) {
  MacroMetrics out;
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    std::size_t tp = m[k][k];
    std::size_t fn = 0;
    std::size_t fp = 0;
    for (std::size_t c = 0; c <= kNumLabels; ++c) {
      if (c != k) fn += m[k][c];
    }
    for (std::size_t g = 0; g < kNumLabels; ++g) {
      if (g != k) fp += m[g][k];
    }
    ClassMetrics& cm = out.per_class[k];
    cm.support = tp + fn;
    cm.precision = safe_div(static_cast<double>(tp), static_cast<double>(tp + fp));
    cm.recall = safe_div(static_cast<double>(tp), static_cast<double>(tp + fn));
    cm.f1 = safe_div(2.0 * cm.precision * cm.recall, cm.precision + cm.recall);
    out.f1 += cm.f1;
    out.precision += cm.precision;
    out.recall += cm.recall;
    total += cm.support;
    correct += tp;
  }
  out.f1 /= kNumLabels;
  out.precision /= kNumLabels;
  out.recall /= kNumLabels;
  out.accuracy = safe_div(static_cast<double>(correct), static_cast<double>(total));
  return out;
}

MacroMetrics macro_metrics(std::span<const PredictionRow> rows) {
  return macro_metrics(confusion(rows));
}

double macro_f1(std::span<const PredictionRow> rows) { return macro_metrics(rows).f1; }
double macro_precision(std::span<const PredictionRow> rows) {
  return macro_metrics(rows).precision;
}
double macro_recall(std::span<const PredictionRow> rows) { return macro_metrics(rows).recall; }
double accuracy(std::span<const PredictionRow> rows) { return macro_metrics(rows).accuracy; }

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap(std::span<const PredictionRow> rows, const MetricFn& metric,
                          std::size_t replicates, std::uint64_t seed, std::size_t threads) {
  if (rows.empty()) throw DomainError("bootstrap of an empty prediction set");
  if (replicates == 0) throw DomainError("bootstrap needs at least one replicate");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, replicates);

  std::vector<double> values(replicates);
  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<PredictionRow> sample(rows.size());
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng(mix_seed(seed, i));
      for (PredictionRow& s : sample) s = rows[rng.below(rows.size())];
      values[i] = metric(sample);
    }
  };
  if (threads == 1) {
    run(0, replicates);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t per = (replicates + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t begin = t * per;
      const std::size_t end = std::min(replicates, begin + per);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
  }

  BootstrapResult out;
  out.estimate = metric(rows);
  out.replicates = replicates;
  out.seed = seed;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(replicates);
  std::sort(values.begin(), values.end());
  out.ci_low = quantile_sorted(values, 0.025);
  out.ci_high = quantile_sorted(values, 0.975);
  return out;
}

EvalReport evaluate(const PredictionSet& preds, std::size_t replicates, std::uint64_t seed,
                    std::size_t threads) {
  preds.validate();
  if (preds.rows.empty()) throw DomainError("cannot evaluate an empty prediction set");
  EvalReport report;
  report.n = preds.rows.size();
  report.matrix = confusion(preds.rows);
  report.metrics = macro_metrics(report.matrix);
  report.meta = preds.meta;
  if (replicates > 0) {
    report.bootstrap["macro_f1"] = bootstrap(preds.rows, macro_f1, replicates, seed, threads);
    report.bootstrap["macro_precision"] =
        bootstrap(preds.rows, macro_precision, replicates, seed, threads);
    report.bootstrap["macro_recall"] = bootstrap(preds.rows, macro_recall, replicates, seed, threads);
  }
  return report;
}

std::optional<double> relative_drop(double in_domain, double external) noexcept {
  if (in_domain == 0.0) return std::nullopt;
  return (in_domain - external) / in_domain;
}

std::vector<MetricDrop> cross_domain_report(const EvalReport& in_domain,
                                            const EvalReport& external) {
  const std::array<std::pair<const char*, double MacroMetrics::*>, 4> metrics = {{
      {"macro_f1", &MacroMetrics::f1},
      {"macro_precision", &MacroMetrics::precision},
      {"macro_recall", &MacroMetrics::recall},
      {"accuracy", &MacroMetrics::accuracy},
  }};
  std::vector<MetricDrop> out;
  for (const auto& [name, member] : metrics) {
    MetricDrop d;
    d.metric = name;
    d.in_domain = in_domain.metrics.*member;
    d.external = external.metrics.*member;
    d.relative_drop = relative_drop(d.in_domain, d.external);
    d.improvement = d.external > d.in_domain;
    out.push_back(std::move(d));
  }
  return out;
}

ValenceShiftReport valence_shift(std::span<const ValenceAssignment> assignments,
                                 std::span<const LabeledChunk> labeled) {
  std::unordered_map<std::string, const ValenceAssignment*> by_term;
  for (const ValenceAssignment& a : assignments) by_term[a.term_id] = &a;

  std::map<std::pair<std::string, std::string>, ShiftEntry> entries;
  for (const LabeledChunk& l : labeled) {
    const auto it = by_term.find(l.chunk.term_id);
    if (it == by_term.end()) {
      throw ValidationError("chunk '" + l.chunk.chunk_id + "' references term '" +
                            l.chunk.term_id + "' missing from the lexicon");
    }
    ShiftEntry& e = entries[{l.chunk.term_id, l.chunk.corpus_tag}];
    e.term_id = l.chunk.term_id;
    e.corpus_tag = l.chunk.corpus_tag;
    e.assigned_stigmatizing = it->second->stigmatizing;
    e.assigned_privileging = it->second->privileging;
    e.observed.insert(l.gold);
  }

  ValenceShiftReport report;
  for (auto& [key, e] : entries) {
    const bool saw_stig = e.observed.count(ValenceLabel::kStigmatizing) > 0;
    const bool saw_priv = e.observed.count(ValenceLabel::kPrivileging) > 0;
    const bool any_assigned = e.assigned_stigmatizing || e.assigned_privileging;
    e.new_neutral = e.observed.count(ValenceLabel::kNeutral) > 0;
    // A flip needs every assigned valence to sit on the other pole.
    e.polarity_flip = (e.assigned_privileging && !e.assigned_stigmatizing && saw_stig) ||
                      (e.assigned_stigmatizing && !e.assigned_privileging && saw_priv);
    e.new_polarity = !any_assigned && (saw_stig || saw_priv);
    report.entries.push_back(std::move(e));
  }
  return report;
}

std::vector<TermErrorRow> keyword_error_report(std::span<const PredictionRow> rows,
                                               std::span<const Chunk> chunks) {
  std::unordered_map<std::string, const Chunk*> by_id;
  for (const Chunk& c : chunks) by_id[c.chunk_id] = &c;

  std::set<std::string> corpora;
  std::map<std::string, TermErrorRow> terms;
  std::map<std::string, std::map<std::pair<std::size_t, std::size_t>, std::size_t>> confusions;
  for (const PredictionRow& r : rows) {
    const auto it = by_id.find(r.chunk_id);
    if (it == by_id.end()) {
      throw ValidationError("prediction for unknown chunk '" + r.chunk_id + "'");
    }
    const Chunk& c = *it->second;
    corpora.insert(c.corpus_tag);
    TermErrorRow& t = terms[c.term_id];
    t.term_id = c.term_id;
    const bool ok = r.predicted && *r.predicted == r.gold;
    ++t.n;
    t.correct += ok;
    ErrorBreakdown& bc = t.by_corpus[c.corpus_tag];
    ++bc.n;
    bc.correct += ok;
    ErrorBreakdown& bs = t.by_specialty[c.specialty];
    ++bs.n;
    bs.correct += ok;
    if (!ok) ++confusions[c.term_id][{index_of(r.gold), column_of(r.predicted)}];
  }

  std::vector<TermErrorRow> out;
  for (auto& [term, t] : terms) {
    t.accuracy = static_cast<double>(t.correct) / static_cast<double>(t.n);
    if (const auto cit = confusions.find(term); cit != confusions.end()) {
      for (const auto& [pair, count] : cit->second) {
        if (count > t.top_confusion_count) {
          t.top_confusion_count = count;
          const Predicted pred = pair.second == kUnparseableColumn
                                     ? Predicted{}
                                     : Predicted{static_cast<ValenceLabel>(pair.second)};
          t.top_confusion = std::make_pair(static_cast<ValenceLabel>(pair.first), pred);
        }
      }
    }
    if (corpora.size() > 1 && t.by_corpus.size() == 1) {
      t.exclusive_corpus = t.by_corpus.begin()->first;
    }
    out.push_back(std::move(t));
  }
  std::stable_sort(out.begin(), out.end(), [](const TermErrorRow& a, const TermErrorRow& b) {
    return a.accuracy < b.accuracy;
  });
  return out;
}

std::string valence_plot_csv(std::span<const ValenceAssignment> assignments,
                             const ValenceShiftReport& shift) {
  std::ostringstream out;
  out << "term_id,stigmatizing_mean,privileging_mean,assigned_stigmatizing,assigned_privileging,"
         "corpus_tag,observed_stigmatizing,observed_privileging,observed_neutral\n";
  for (const ValenceAssignment& a : assignments) {
    const auto prefix = [&] {
      out << a.term_id << ',' << format_mean(a.stigmatizing_mean) << ','
          << format_mean(a.privileging_mean) << ',' << int(a.stigmatizing) << ','
          << int(a.privileging) << ',';
    };
    bool any = false;
    for (const ShiftEntry& e : shift.entries) {
      if (e.term_id != a.term_id) continue;
      any = true;
      prefix();
      out << e.corpus_tag << ',' << e.observed.count(ValenceLabel::kStigmatizing) << ','
          << e.observed.count(ValenceLabel::kPrivileging) << ','
          << e.observed.count(ValenceLabel::kNeutral) << '\n';
    }
    if (!any) {
      prefix();
      out << ",0,0,0\n";
    }
  }
  return out.str();
}

}  // namespace valence
