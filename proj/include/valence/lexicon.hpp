#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace valence {

/// The two valences a lexicon term can be rated for.
enum class Valence { kStigmatizing, kPrivileging };

std::string_view to_string(Valence valence) noexcept;
Valence parse_valence(std::string_view text);

/// Collapsed Likert response used for rater agreement: 1-2 agree, 3
/// undecided, 4-5 disagree. Enumerator order is the ordinal order.
enum class AgreementCategory { kAgree = 0, kUndecided = 1, kDisagree = 2 };

std::string_view to_string(AgreementCategory category) noexcept;

/// A keyword with its whole-word surface variants.
struct LexiconTerm {
  std::string term_id;
  std::string canonical;
  std::vector<std::string> variants;
  std::string notes;

  /// Throws ValidationError when a term invariant is broken.
  void validate() const;
};

/// One rater's 1..5 Likert score (1 = strongly agree the term carries the
/// valence).
struct TermRating {
  std::string term_id;
  std::string rater_id;
  Valence valence = Valence::kStigmatizing;
  int score = 3;
};

/// Exact mean of integer scores, kept as sum/count so threshold comparisons
/// are not perturbed by rounding.
struct ExactMean {
  std::int64_t sum = 0;
  std::int64_t count = 0;

  double value() const noexcept { return static_cast<double>(sum) / static_cast<double>(count); }
  bool operator==(const ExactMean& other) const noexcept {
    return sum * other.count == other.sum * count;
  }
};

/// mean <= threshold, evaluated without rounding the mean.
bool within_threshold(const ExactMean& mean, double threshold) noexcept;

struct ValenceAssignment {
  std::string term_id;
  std::optional<ExactMean> stigmatizing_mean;
  std::optional<ExactMean> privileging_mean;
  bool stigmatizing = false;
  bool privileging = false;
  bool included = false;

  bool assigned(Valence v) const noexcept {
    return v == Valence::kStigmatizing ? stigmatizing : privileging;
  }
};

struct LexiconConfig {
  double inclusion_threshold = 2.5;
  /// Every rater must rate every term for both valences; absences become
  /// warnings instead of being imputed.
  bool require_full_overlap = false;

  void validate() const;
};

/// Throws DomainError outside 1..5.
AgreementCategory categorize_rating(int score);

/// Aggregates the ratings that belong to `term_id` (others are ignored). A
/// valence without ratings has no mean and is never assigned.
ValenceAssignment aggregate_term(std::string_view term_id, std::span<const TermRating> ratings,
                                 const LexiconConfig& config = {});

struct Lexicon {
  std::vector<LexiconTerm> terms;
  std::vector<TermRating> ratings;
  std::vector<std::string> warnings;

  const LexiconTerm* find(std::string_view term_id) const noexcept;
};

/// Parses the tab-separated terms table (term_id, canonical, variants,
/// notes; variants separated by '|') and optionally the ratings table
/// (term_id, rater_id, valence, score). Both start with a header row.
Lexicon parse_lexicon(std::string_view terms_tsv, std::string_view ratings_tsv = {},
                      const std::string& terms_source = "terms",
                      const std::string& ratings_source = "ratings");

Lexicon load_lexicon(const std::filesystem::path& terms_path,
                     const std::optional<std::filesystem::path>& ratings_path = std::nullopt);

/// Aggregates every term in lexicon order. With `require_full_overlap`,
/// missing (term, rater, valence) ratings are appended to `warnings`.
std::vector<ValenceAssignment> score_lexicon(const Lexicon& lexicon, const LexiconConfig& config,
                                             std::vector<std::string>* warnings = nullptr);

}  // namespace valence
