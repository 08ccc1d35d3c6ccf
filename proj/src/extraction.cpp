#include "valence/extraction.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <regex>

#include "valence/error.hpp"
#include "valence/util/quota.hpp"
#include "valence/util/random.hpp"
#include "valence/util/utf8.hpp"

namespace valence {

namespace {

bool word_at(std::u32string_view text, std::size_t pos) {
  return pos < text.size() && utf8::is_word_char(text[pos]);
}

/// `\b` at position `pos`: word-ness differs on the two sides.
bool boundary(std::u32string_view text, std::size_t pos) {
  const bool left = pos > 0 && utf8::is_word_char(text[pos - 1]);
  return left != word_at(text, pos);
}

bool is_digit(char32_t c) { return c >= '0' && c <= '9'; }

std::vector<std::size_t> sorted_take(std::vector<std::size_t> idx, std::size_t n) {
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

Matcher Matcher::compile(const LexiconTerm& term) {
  term.validate();
  Matcher m;
  m.term_id_ = term.term_id;
  for (const std::string& v : term.variants) {
    std::u32string folded = utf8::fold_case(utf8::decode(v));
    if (std::none_of(folded.begin(), folded.end(), utf8::is_word_char)) {
      throw ValidationError("term '" + term.term_id + "': variant '" + v +
                            "' has no word characters");
    }
    if (std::find(m.variants_.begin(), m.variants_.end(), folded) == m.variants_.end()) {
      m.variants_.push_back(std::move(folded));
    }
  }
  std::stable_sort(m.variants_.begin(), m.variants_.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return m;
}

std::vector<MatchSpan> Matcher::find_all(std::u32string_view text) const {
  std::vector<MatchSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    bool hit = false;
    if (boundary(text, i)) {
      for (const std::u32string& v : variants_) {
        if (text.compare(i, v.size(), v) == 0 && boundary(text, i + v.size())) {
          out.push_back({i, i + v.size()});
          i += v.size();
          hit = true;
          break;
        }
      }
    }
    if (!hit) ++i;
  }
  return out;
}

std::vector<MatchSpan> Matcher::find_all_utf8(std::string_view text) const {
  return find_all(utf8::fold_case(utf8::decode(text)));
}

std::vector<Matcher> compile_matchers(std::span<const LexiconTerm> terms) {
  std::vector<Matcher> out;
  out.reserve(terms.size());
  for (const LexiconTerm& t : terms) out.push_back(Matcher::compile(t));
  return out;
}

std::vector<KeywordMatch> find_matches(const SourceNote& note, std::span<const Matcher> matchers) {
  const std::u32string text = utf8::decode(note.text);
  const std::u32string folded = utf8::fold_case(text);
  struct Found {
    std::size_t start, end, matcher;
  };
  std::vector<Found> found;
  for (std::size_t m = 0; m < matchers.size(); ++m) {
    for (const MatchSpan& s : matchers[m].find_all(folded)) found.push_back({s.start, s.end, m});
  }
  std::stable_sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    return a.start != b.start ? a.start < b.start : a.matcher < b.matcher;
  });
  std::vector<KeywordMatch> out;
  out.reserve(found.size());
  for (const Found& f : found) {
    out.push_back({note.note_id, matchers[f.matcher].term_id(),
                   utf8::encode(std::u32string_view(text).substr(f.start, f.end - f.start)),
                   f.start, f.end});
  }
  return out;
}

Chunk extract_chunk(const SourceNote& note, const KeywordMatch& match, std::size_t window) {
  const std::u32string text = utf8::decode(note.text);
  if (match.start >= match.end || match.end > text.size()) {
    throw DomainError("match [" + std::to_string(match.start) + ", " + std::to_string(match.end) +
                      ") is outside note '" + note.note_id + "'");
  }
  const std::size_t begin = match.start > window ? match.start - window : 0;
  const std::size_t end = std::min(text.size(), match.end + window);
  Chunk c;
  c.chunk_id = note.note_id + ":" + match.term_id + ":" + std::to_string(match.start);
  c.note_id = note.note_id;
  c.term_id = match.term_id;
  c.surface = match.surface;
  c.window_text = utf8::encode(std::u32string_view(text).substr(begin, end - begin));
  c.anchor_start = match.start - begin;
  c.anchor_end = match.end - begin;
  c.source_start = begin;
  c.source_end = end;
  c.corpus_tag = note.corpus_tag;
  c.specialty = note.specialty;
  return c;
}

std::vector<Chunk> extract_all(std::span<const SourceNote> notes, std::span<const Matcher> matchers,
                               std::size_t window) {
  std::vector<Chunk> out;
  for (const SourceNote& note : notes) {
    for (const KeywordMatch& m : find_matches(note, matchers)) {
      out.push_back(extract_chunk(note, m, window));
    }
  }
  return out;
}

std::vector<Chunk> sample_chunks(std::span<const Chunk> chunks, const SampleStrategy& strategy,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> chosen;

  // Term groups in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(chunks[i].term_id);
    if (inserted) order.push_back(chunks[i].term_id);
    it->second.push_back(i);
  }

  if (strategy.kind == SampleStrategy::Kind::kPerKeyword) {
    for (const std::string& term : order) {
      std::vector<std::size_t>& members = groups[term];
      rng.shuffle(members);
      members.resize(std::min(strategy.n, members.size()));
      chosen.insert(chosen.end(), members.begin(), members.end());
    }
    std::sort(chosen.begin(), chosen.end());
  } else if (strategy.n >= chunks.size()) {
    chosen.resize(chunks.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
  } else if (!strategy.stratify_by_term) {
    chosen = sorted_take(rng.permutation(chunks.size()), strategy.n);
  } else {
    std::vector<std::size_t> sizes;
    std::vector<double> targets;
    for (const std::string& term : order) {
      sizes.push_back(groups[term].size());
      targets.push_back(static_cast<double>(strategy.n) * static_cast<double>(sizes.back()) /
                        static_cast<double>(chunks.size()));
    }
    const std::vector<std::size_t> quota = allocate_quota(targets, sizes, strategy.n);
    for (std::size_t g = 0; g < order.size(); ++g) {
      std::vector<std::size_t>& members = groups[order[g]];
      rng.shuffle(members);
      chosen.insert(chosen.end(), members.begin(), members.begin() + quota[g]);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<Chunk> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(chunks[i]);
  return out;
}

DeidReport validate_deid(std::string_view text_utf8, const DeidConfig& config) {
  DeidReport report;
  const std::u32string text = utf8::decode(text_utf8);
  const std::size_t n = text.size();

  for (std::size_t i = 0; i < n;) {
    if (text[i] != U'_') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && text[j] == U'_') ++j;
    if (j - i != 3) {
      report.violations.push_back({DeidIssue::Kind::kPlaceholderRun, i, j - i,
                                   "underscore run of length " + std::to_string(j - i) +
                                       " (placeholder is exactly ___)"});
    }
    i = j;
  }

  for (std::size_t i = 0; i < n;) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_digit(text[j])) ++j;
    if (config.min_digit_run > 0 && j - i >= config.min_digit_run) {
      report.warnings.push_back({DeidIssue::Kind::kDigitRun, i, j - i,
                                 "run of " + std::to_string(j - i) + " digits"});
    }
    i = j;
  }

  if (config.flag_dates) {
    // d{1,2}[/-]d{1,2}[/-]d{2,4} or d{4}-d{1,2}-d{1,2}, delimited by non-digits.
    auto digits_from = [&](std::size_t pos) {
      std::size_t k = pos;
      while (k < n && is_digit(text[k])) ++k;
      return k - pos;
    };
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_digit(text[i]) || (i > 0 && is_digit(text[i - 1]))) continue;
      const std::size_t g1 = digits_from(i);
      std::size_t p = i + g1;
      if (p >= n || (text[p] != U'/' && text[p] != U'-')) continue;
      const char32_t sep = text[p];
      const std::size_t g2 = digits_from(p + 1);
      if (g2 == 0) continue;
      p += 1 + g2;
      if (p >= n || text[p] != sep) continue;
      const std::size_t g3 = digits_from(p + 1);
      const bool us = g1 <= 2 && g2 <= 2 && g3 >= 2 && g3 <= 4;
      const bool iso = g1 == 4 && g2 <= 2 && g3 >= 1 && g3 <= 2;
      if (us || iso) {
        const std::size_t len = p + 1 + g3 - i;
        report.warnings.push_back({DeidIssue::Kind::kDateLike, i, len, "date-like pattern"});
      }
    }
  }

  for (const std::string& pattern : config.forbidden_patterns) {
    std::regex re;
    try {
      re = std::regex(pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error&) {
      throw ValidationError("invalid forbidden pattern '" + pattern + "'");
    }
    const std::string bytes(text_utf8);
    for (auto it = std::sregex_iterator(bytes.begin(), bytes.end(), re);
         it != std::sregex_iterator(); ++it) {
      const auto pos = static_cast<std::size_t>(it->position());
      const auto len = static_cast<std::size_t>(it->length());
      const std::size_t start = utf8::length(std::string_view(bytes).substr(0, pos));
      const std::size_t scalars = utf8::length(std::string_view(bytes).substr(pos, len));
      report.warnings.push_back(
          {DeidIssue::Kind::kPattern, start, scalars, "matches forbidden pattern " + pattern});
    }
  }
  return report;
}

}  // namespace valence
