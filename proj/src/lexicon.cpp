#include "valence/lexicon.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_set>

#include "valence/error.hpp"
#include "valence/util/jsonl.hpp"
#include "valence/util/utf8.hpp"

namespace valence {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? next : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Splits TSV text into non-blank rows, remembering 1-based line numbers.
std::vector<std::pair<std::size_t, std::vector<std::string_view>>> tsv_rows(
    std::string_view text) {
  std::vector<std::pair<std::size_t, std::vector<std::string_view>>> rows;
  std::size_t line_no = 0;
  for (std::string_view line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;
    rows.emplace_back(line_no, split(line, '\t'));
  }
  return rows;
}

void expect_header(const std::vector<std::string_view>& row, std::size_t line,
                   std::initializer_list<std::string_view> names, const std::string& source) {
  std::size_t i = 0;
  for (std::string_view name : names) {
    if (i >= row.size() || trim(row[i]) != name) {
      throw ParseError(source, line, "expected header column '" + std::string(name) + "'");
    }
    ++i;
  }
}

}  // namespace

std::string_view to_string(Valence valence) noexcept {
  return valence == Valence::kStigmatizing ? "stigmatizing" : "privileging";
}

Valence parse_valence(std::string_view text) {
  if (text == "stigmatizing") return Valence::kStigmatizing;
  if (text == "privileging") return Valence::kPrivileging;
  throw ValidationError("invalid valence '" + std::string(text) + "'");
}

std::string_view to_string(AgreementCategory category) noexcept {
  switch (category) {
    case AgreementCategory::kAgree:
      return "agree";
    case AgreementCategory::kUndecided:
      return "undecided";
    case AgreementCategory::kDisagree:
      return "disagree";
  }
  return "undecided";
}

void LexiconTerm::validate() const {
  if (term_id.empty()) throw ValidationError("term with empty term_id");
  if (variants.empty()) throw ValidationError("term '" + term_id + "' has no variants");
  std::unordered_set<std::string> seen;
  for (const std::string& v : variants) {
    if (v.empty()) throw ValidationError("term '" + term_id + "' has an empty variant");
    if (!seen.insert(v).second) {
      throw ValidationError("term '" + term_id + "' repeats variant '" + v + "'");
    }
  }
  if (canonical.empty()) throw ValidationError("term '" + term_id + "' has no canonical form");
  // The canonical form is either a variant or the stem shared by them, as in
  // "compliance" for {noncompliant, noncompliance, poor compliance, compliant}.
  const std::string canon = utf8::to_lower(canonical);
  const bool found = std::any_of(variants.begin(), variants.end(), [&](const std::string& v) {
    return utf8::to_lower(v).find(canon) != std::string::npos;
  });
  if (!found) {
    throw ValidationError("term '" + term_id + "': canonical '" + canonical +
                          "' does not occur in any variant");
  }
}

void LexiconConfig::validate() const {
  if (!(inclusion_threshold >= 1.0 && inclusion_threshold <= 5.0)) {
    throw ValidationError("inclusion threshold must lie in [1, 5]");
  }
}

bool within_threshold(const ExactMean& mean, double threshold) noexcept {
  if (mean.count <= 0) return false;
  // Exact for |sum|, count < 2^63 with an x87 64-bit mantissa; at worst the
  // product rounds once, far below the 1e-12 budget.
  return static_cast<long double>(mean.sum) <=
         static_cast<long double>(threshold) * static_cast<long double>(mean.count);
}

AgreementCategory categorize_rating(int score) {
  if (score < 1 || score > 5) {
    throw DomainError("Likert score " + std::to_string(score) + " outside 1..5");
  }
  if (score <= 2) return AgreementCategory::kAgree;
  if (score == 3) return AgreementCategory::kUndecided;
  return AgreementCategory::kDisagree;
}

ValenceAssignment aggregate_term(std::string_view term_id, std::span<const TermRating> ratings,
                                 const LexiconConfig& config) {
  config.validate();
  ValenceAssignment out;
  out.term_id = std::string(term_id);
  ExactMean stig, priv;
  std::set<std::pair<std::string, Valence>> seen;
  for (const TermRating& r : ratings) {
    if (r.term_id != term_id) continue;
    categorize_rating(r.score);
    if (!seen.emplace(r.rater_id, r.valence).second) {
      throw ValidationError("duplicate rating for term '" + r.term_id + "', rater '" + r.rater_id +
                            "', valence " + std::string(to_string(r.valence)));
    }
    ExactMean& m = r.valence == Valence::kStigmatizing ? stig : priv;
    m.sum += r.score;
    m.count += 1;
  }
  if (stig.count > 0) out.stigmatizing_mean = stig;
  if (priv.count > 0) out.privileging_mean = priv;
  out.stigmatizing = stig.count > 0 && within_threshold(stig, config.inclusion_threshold);
  out.privileging = priv.count > 0 && within_threshold(priv, config.inclusion_threshold);
  out.included = out.stigmatizing || out.privileging;
  return out;
}

const LexiconTerm* Lexicon::find(std::string_view term_id) const noexcept {
  for (const LexiconTerm& t : terms) {
    if (t.term_id == term_id) return &t;
  }
  return nullptr;
}

Lexicon parse_lexicon(std::string_view terms_tsv, std::string_view ratings_tsv,
                      const std::string& terms_source, const std::string& ratings_source) {
  Lexicon lex;
  auto rows = tsv_rows(terms_tsv);
  if (rows.empty()) {
    lex.warnings.push_back(terms_source + ": lexicon is empty");
  } else {
    expect_header(rows.front().second, rows.front().first,
                  {"term_id", "canonical", "variants"}, terms_source);
    std::unordered_set<std::string> ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& [line, cols] = rows[r];
      if (cols.size() < 3 || cols.size() > 4) {
        throw ParseError(terms_source, line, "expected 3 or 4 tab-separated columns");
      }
      LexiconTerm term;
      term.term_id = std::string(trim(cols[0]));
      term.canonical = std::string(trim(cols[1]));
      for (std::string_view v : split(cols[2], '|')) term.variants.emplace_back(trim(v));
      if (cols.size() == 4) term.notes = std::string(trim(cols[3]));
      try {
        term.validate();
      } catch (const ValidationError& e) {
        throw ParseError(terms_source, line, e.what());
      }
      if (!ids.insert(term.term_id).second) {
        throw ParseError(terms_source, line, "duplicate term_id '" + term.term_id + "'");
      }
      lex.terms.push_back(std::move(term));
    }
  }

  auto rating_rows = tsv_rows(ratings_tsv);
  if (rating_rows.empty()) return lex;
  expect_header(rating_rows.front().second, rating_rows.front().first,
                {"term_id", "rater_id", "valence", "score"}, ratings_source);
  std::set<std::tuple<std::string, std::string, Valence>> seen;
  for (std::size_t r = 1; r < rating_rows.size(); ++r) {
    const auto& [line, cols] = rating_rows[r];
    if (cols.size() != 4) throw ParseError(ratings_source, line, "expected 4 columns");
    TermRating rating;
    rating.term_id = std::string(trim(cols[0]));
    rating.rater_id = std::string(trim(cols[1]));
    try {
      rating.valence = parse_valence(trim(cols[2]));
    } catch (const ValidationError& e) {
      throw ParseError(ratings_source, line, e.what());
    }
    const std::string score_text(trim(cols[3]));
    if (score_text.size() != 1 || score_text[0] < '1' || score_text[0] > '5') {
      throw ParseError(ratings_source, line, "score '" + score_text + "' is not an integer 1..5");
    }
    rating.score = score_text[0] - '0';
    if (!lex.find(rating.term_id)) {
      throw ParseError(ratings_source, line, "rating for unknown term '" + rating.term_id + "'");
    }
    if (!seen.emplace(rating.term_id, rating.rater_id, rating.valence).second) {
      throw ValidationError(ratings_source + ":" + std::to_string(line) +
                            ": duplicate rating for term '" + rating.term_id + "', rater '" +
                            rating.rater_id + "', valence " +
                            std::string(to_string(rating.valence)));
    }
    lex.ratings.push_back(std::move(rating));
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& terms_path,
                     const std::optional<std::filesystem::path>& ratings_path) {
  const std::string terms = read_text(terms_path);
  const std::string ratings = ratings_path ? read_text(*ratings_path) : std::string();
  return parse_lexicon(terms, ratings, terms_path.string(),
                       ratings_path ? ratings_path->string() : std::string("ratings"));
}

std::vector<ValenceAssignment> score_lexicon(const Lexicon& lexicon, const LexiconConfig& config,
                                             std::vector<std::string>* warnings) {
  std::vector<ValenceAssignment> out;
  out.reserve(lexicon.terms.size());
  for (const LexiconTerm& term : lexicon.terms) {
    out.push_back(aggregate_term(term.term_id, lexicon.ratings, config));
  }
  if (config.require_full_overlap && warnings) {
    std::set<std::string> raters;
    std::set<std::tuple<std::string, std::string, Valence>> present;
    for (const TermRating& r : lexicon.ratings) {
      raters.insert(r.rater_id);
      present.emplace(r.term_id, r.rater_id, r.valence);
    }
    for (const LexiconTerm& term : lexicon.terms) {
      for (const std::string& rater : raters) {
        for (Valence v : {Valence::kStigmatizing, Valence::kPrivileging}) {
          if (!present.count({term.term_id, rater, v})) {
            warnings->push_back("missing " + std::string(to_string(v)) + " rating for term '" +
                                term.term_id + "' by rater '" + rater + "'");
          }
        }
      }
    }
  }
  return out;
}

}  // namespace valence
