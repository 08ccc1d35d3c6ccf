#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valence/lexicon.hpp"

namespace valence {

inline constexpr std::size_t kDefaultWindow = 200;

/// A de-identified clinical note. Offsets into `text` everywhere in this
/// module count Unicode scalar values, not bytes.
struct SourceNote {
  std::string note_id;
  std::string corpus_tag;
  std::string specialty;
  std::string text;
};

struct KeywordMatch {
  std::string note_id;
  std::string term_id;
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
};

/// A character window around one keyword match.
struct Chunk {
  std::string chunk_id;
  std::string note_id;
  std::string term_id;
  std::string surface;
  std::string window_text;
  std::size_t anchor_start = 0;
  std::size_t anchor_end = 0;
  std::size_t source_start = 0;  // window bounds in the note
  std::size_t source_end = 0;
  std::string corpus_tag;
  std::string specialty;
};

struct MatchSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const MatchSpan&) const = default;
};

/// Whole-word, case-insensitive recognizer for one term's variants,
/// equivalent to `\b(?:v1|v2|...)\b` with leftmost-longest resolution.
class Matcher {
 public:
  /// Throws ValidationError on an invalid term or a variant made only of
  /// non-word characters.
  static Matcher compile(const LexiconTerm& term);

  const std::string& term_id() const noexcept { return term_id_; }

  /// Non-overlapping leftmost-longest matches over case-folded scalars.
  std::vector<MatchSpan> find_all(std::u32string_view folded_text) const;

  /// Convenience overload taking UTF-8.
  std::vector<MatchSpan> find_all_utf8(std::string_view text) const;

 private:
  std::string term_id_;
  std::vector<std::u32string> variants_;  // folded, longest first
};

std::vector<Matcher> compile_matchers(std::span<const LexiconTerm> terms);

/// All matches of all terms, in document order (ties in matcher order).
std::vector<KeywordMatch> find_matches(const SourceNote& note, std::span<const Matcher> matchers);

/// Window of `window` scalars on each side of the match, truncated at the
/// note edges.
Chunk extract_chunk(const SourceNote& note, const KeywordMatch& match,
                    std::size_t window = kDefaultWindow);

/// find_matches + extract_chunk over many notes, in note order.
std::vector<Chunk> extract_all(std::span<const SourceNote> notes, std::span<const Matcher> matchers,
                               std::size_t window = kDefaultWindow);

struct SampleStrategy {
  enum class Kind { kPerKeyword, kTotal };
  Kind kind = Kind::kTotal;
  std::size_t n = 0;
  bool stratify_by_term = false;

  static SampleStrategy per_keyword(std::size_t n) { return {Kind::kPerKeyword, n, false}; }
  static SampleStrategy total(std::size_t n, bool stratify = false) {
    return {Kind::kTotal, n, stratify};
  }
};

/// Seeded sampling. The result keeps the input order of the chosen chunks.
std::vector<Chunk> sample_chunks(std::span<const Chunk> chunks, const SampleStrategy& strategy,
                                 std::uint64_t seed);

struct DeidIssue {
  enum class Kind { kPlaceholderRun, kDigitRun, kDateLike, kPattern };
  Kind kind;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::string message;
};

struct DeidConfig {
  std::size_t min_digit_run = 7;
  bool flag_dates = true;
  /// Additional ECMAScript regexes reported as PHI-risk warnings.
  std::vector<std::string> forbidden_patterns;
};

struct DeidReport {
  std::vector<DeidIssue> violations;  // placeholder convention broken
  std::vector<DeidIssue> warnings;    // PHI-risk patterns

  bool ok() const noexcept { return violations.empty() && warnings.empty(); }
};

/// Checks the "___" PHI placeholder convention and flags PHI-risk patterns.
DeidReport validate_deid(std::string_view text, const DeidConfig& config = {});

}  // namespace valence
