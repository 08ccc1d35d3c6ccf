#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "valence/dataset.hpp"
#include "valence/extraction.hpp"
#include "valence/label.hpp"
#include "valence/lexicon.hpp"

namespace valence {

struct PredictionRow {
  std::string chunk_id;
  ValenceLabel gold = ValenceLabel::kNeutral;
  Predicted predicted;
};

struct PredictionMeta {
  std::string backend;
  std::string template_kind;
  std::string corpus_tag;
  std::string split;
};

struct PredictionSet {
  std::vector<PredictionRow> rows;
  PredictionMeta meta;

  /// Throws ValidationError on duplicate chunk ids.
  void validate() const;
};

/// Column index of a prediction in the confusion matrix; Unparseable is 3.
inline constexpr std::size_t kUnparseableColumn = kNumLabels;

/// counts[gold][predicted], with a trailing Unparseable column.
using ConfusionMatrix = std::array<std::array<std::size_t, kNumLabels + 1>, kNumLabels>;

ConfusionMatrix confusion(std::span<const PredictionRow> rows);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MacroMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
  std::array<ClassMetrics, kNumLabels> per_class{};
};

/// Per-class precision/recall/F1 with 0/0 = 0, macro-averaged over the three
/// gold classes. Unparseable predictions are a false negative for their gold
/// class and a false positive for none.
MacroMetrics macro_metrics(std::span<const PredictionRow> rows);
MacroMetrics macro_metrics(const ConfusionMatrix& matrix);

using MetricFn = std::function<double(std::span<const PredictionRow>)>;

double macro_f1(std::span<const PredictionRow> rows);
double macro_precision(std::span<const PredictionRow> rows);
double macro_recall(std::span<const PredictionRow> rows);
double accuracy(std::span<const PredictionRow> rows);

struct BootstrapResult {
  double estimate = 0.0;  // metric on the full sample
  double mean = 0.0;      // mean over replicates
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
};

/// Percentile bootstrap (2.5 / 97.5). Replicate i draws from its own
/// generator seeded with mix_seed(seed, i), so results do not depend on
/// `threads` (0 = hardware concurrency).
BootstrapResult bootstrap(std::span<const PredictionRow> rows, const MetricFn& metric,
                          std::size_t replicates = 1000, std::uint64_t seed = 42,
                          std::size_t threads = 0);

/// Linear-interpolation quantile of sorted values, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

struct EvalReport {
  std::size_t n = 0;
  MacroMetrics metrics;
  ConfusionMatrix matrix{};
  std::map<std::string, BootstrapResult> bootstrap;  // keyed by metric name
  PredictionMeta meta;
};

EvalReport evaluate(const PredictionSet& preds, std::size_t replicates = 1000,
                    std::uint64_t seed = 42, std::size_t threads = 0);

struct MetricDrop {
  std::string metric;
  double in_domain = 0.0;
  double external = 0.0;
  std::optional<double> relative_drop;  // (in - ext) / in; nullopt when in == 0
  bool improvement = false;
};

/// (in - ext) / in, or nullopt when the in-domain value is 0.
std::optional<double> relative_drop(double in_domain, double external) noexcept;

std::vector<MetricDrop> cross_domain_report(const EvalReport& in_domain,
                                            const EvalReport& external);

struct ShiftEntry {
  std::string term_id;
  std::string corpus_tag;
  bool assigned_stigmatizing = false;
  bool assigned_privileging = false;
  std::set<ValenceLabel> observed;
  bool new_neutral = false;
  bool polarity_flip = false;
  bool new_polarity = false;
};

struct ValenceShiftReport {
  std::vector<ShiftEntry> entries;  // sorted by (term_id, corpus_tag)
};

/// Compares lexicon assignments with labels observed in context, per term and
/// corpus. Throws ValidationError for a chunk whose term is not in the
/// assignments.
ValenceShiftReport valence_shift(std::span<const ValenceAssignment> assignments,
                                 std::span<const LabeledChunk> labeled);

struct ErrorBreakdown {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy() const noexcept {
    return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
  }
};

struct TermErrorRow {
  std::string term_id;
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  std::optional<std::pair<ValenceLabel, Predicted>> top_confusion;
  std::size_t top_confusion_count = 0;
  std::map<std::string, ErrorBreakdown> by_corpus;
  std::map<std::string, ErrorBreakdown> by_specialty;
  /// Set when the term occurs in exactly one corpus while the predictions
  /// span several.
  std::optional<std::string> exclusive_corpus;
};

/// Per-term accuracy table, ascending by accuracy (ties by term id). Throws
/// ValidationError when a prediction has no matching chunk.
std::vector<TermErrorRow> keyword_error_report(std::span<const PredictionRow> rows,
                                               std::span<const Chunk> chunks);

/// CSV plot data: one row per (term, corpus) with lexicon means, assigned
/// valences and observed labels; terms never observed get an empty corpus.
std::string valence_plot_csv(std::span<const ValenceAssignment> assignments,
                             const ValenceShiftReport& shift);

}  // namespace valence
