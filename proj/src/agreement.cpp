#include "valence/agreement.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "valence/error.hpp"

namespace valence {

std::size_t RatingTable::raters(std::size_t item) const {
  return std::accumulate(counts[item].begin(), counts[item].end(), std::size_t{0});
}

void RatingTable::validate() const {
  if (counts.size() != items.size()) throw ValidationError("rating table: row count mismatch");
  for (const auto& row : counts) {
    if (row.size() != categories.size()) {
      throw ValidationError("rating table: column count mismatch");
    }
  }
}

std::string_view to_string(WeightScheme scheme) noexcept {
  switch (scheme) {
    case WeightScheme::kIdentity:
      return "identity";
    case WeightScheme::kLinear:
      return "linear_ordinal";
    case WeightScheme::kQuadratic:
      return "quadratic_ordinal";
  }
  return "identity";
}

WeightScheme parse_weight_scheme(std::string_view text) {
  if (text == "identity") return WeightScheme::kIdentity;
  if (text == "linear" || text == "linear_ordinal") return WeightScheme::kLinear;
  if (text == "quadratic" || text == "quadratic_ordinal") return WeightScheme::kQuadratic;
  throw ValidationError("unknown weight scheme '" + std::string(text) + "'");
}

std::vector<std::vector<double>> weight_matrix(WeightScheme scheme, std::size_t q) {
  std::vector<std::vector<double>> w(q, std::vector<double>(q, 0.0));
  const double span = q > 1 ? static_cast<double>(q - 1) : 1.0;
  for (std::size_t k = 0; k < q; ++k) {
    for (std::size_t l = 0; l < q; ++l) {
      const double d = std::abs(static_cast<double>(k) - static_cast<double>(l));
      switch (scheme) {
        case WeightScheme::kIdentity:
          w[k][l] = k == l ? 1.0 : 0.0;
          break;
        case WeightScheme::kLinear:
          w[k][l] = 1.0 - d / span;
          break;
        case WeightScheme::kQuadratic:
          w[k][l] = 1.0 - (d * d) / (span * span);
          break;
      }
    }
  }
  return w;
}

double percent_agreement(const RatingTable& table, std::vector<std::string>* warnings) {
  table.validate();
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < table.items.size(); ++i) {
    const std::size_t r = table.raters(i);
    if (r < 2) {
      if (warnings) warnings->push_back("item '" + table.items[i] + "' has fewer than 2 raters");
      continue;
    }
    std::size_t agreeing = 0;
    for (std::size_t c : table.counts[i]) {
      if (c > 1) agreeing += c * (c - 1);
    }
    total += static_cast<double>(agreeing) / static_cast<double>(r * (r - 1));
    ++used;
  }
  if (used == 0) throw DomainError("percent agreement: no item has at least 2 raters");
  return total / static_cast<double>(used);
}

double gwet_ac(const RatingTable& table, WeightScheme scheme) {
  table.validate();
  const std::size_t q = table.categories.size();
  if (q < 2) throw DomainError("Gwet AC needs at least 2 categories");
  const auto w = weight_matrix(scheme, q);

  std::vector<double> prevalence(q, 0.0);
  std::size_t rated = 0;
  double pa = 0.0;
  std::size_t multi = 0;
  for (std::size_t i = 0; i < table.items.size(); ++i) {
    const std::size_t r = table.raters(i);
    if (r == 0) continue;
    ++rated;
    const auto& row = table.counts[i];
    for (std::size_t k = 0; k < q; ++k) {
      prevalence[k] += static_cast<double>(row[k]) / static_cast<double>(r);
    }
    if (r < 2) continue;
    ++multi;
    double item = 0.0;
    for (std::size_t k = 0; k < q; ++k) {
      double weighted = 0.0;
      for (std::size_t l = 0; l < q; ++l) weighted += w[k][l] * static_cast<double>(row[l]);
      item += static_cast<double>(row[k]) * (weighted - 1.0);
    }
    pa += item / static_cast<double>(r * (r - 1));
  }
  if (multi == 0) throw DomainError("Gwet AC: no item has at least 2 raters");
  pa /= static_cast<double>(multi);

  double weight_total = 0.0;
  for (const auto& row : w) weight_total = std::accumulate(row.begin(), row.end(), weight_total);
  double spread = 0.0;
  for (double& p : prevalence) {
    p /= static_cast<double>(rated);
    spread += p * (1.0 - p);
  }
  const double pe = weight_total / static_cast<double>(q * (q - 1)) * spread;
  if (std::abs(1.0 - pe) < 1e-15) {
    throw DomainError("Gwet AC undefined: chance agreement equals 1");
  }
  return (pa - pe) / (1.0 - pe);
}

std::string_view benchmark_label(double c) noexcept {
  if (c < 0.0) return "poor";
  if (c < 0.2) return "slight";
  if (c < 0.4) return "fair";
  if (c < 0.6) return "moderate";
  if (c < 0.8) return "substantial";
  return "almost perfect";
}

RatingTable table_from_annotations(std::span<const AnnotationRecord> records,
                                   std::span<const ValenceLabel> category_order) {
  std::vector<std::ptrdiff_t> column(kNumLabels, -1);
  RatingTable table;
  for (std::size_t k = 0; k < category_order.size(); ++k) {
    column[index_of(category_order[k])] = static_cast<std::ptrdiff_t>(k);
    table.categories.emplace_back(to_string(category_order[k]));
  }
  std::map<std::string, std::vector<const AnnotationRecord*>> by_chunk;
  for (const AnnotationRecord& r : records) by_chunk[r.chunk_id].push_back(&r);
  for (const auto& [chunk_id, group] : by_chunk) {
    if (group.size() < 2) continue;
    std::vector<std::size_t> row(category_order.size(), 0);
    for (const AnnotationRecord* r : group) {
      const std::ptrdiff_t c = column[index_of(r->label)];
      if (c < 0) {
        throw ValidationError("label '" + std::string(to_string(r->label)) +
                              "' is not in the category list");
      }
      ++row[static_cast<std::size_t>(c)];
    }
    table.items.push_back(chunk_id);
    table.counts.push_back(std::move(row));
  }
  if (table.items.empty()) throw DomainError("no chunk is labeled by two or more annotators");
  return table;
}

AgreementReport agreement_from_annotations(std::span<const AnnotationRecord> records,
                                           std::span<const ValenceLabel> category_order,
                                           WeightScheme scheme) {
  const RatingTable table = table_from_annotations(records, category_order);
  AgreementReport report;
  report.percent_agreement = percent_agreement(table);
  report.gwet_ac = gwet_ac(table, scheme);
  report.scheme = scheme;
  report.n_items = table.items.size();
  report.n_categories = table.categories.size();
  report.benchmark = std::string(benchmark_label(report.gwet_ac));
  return report;
}

RatingTable lexicon_agreement_table(const Lexicon& lexicon, Valence valence) {
  RatingTable table;
  for (AgreementCategory c :
       {AgreementCategory::kAgree, AgreementCategory::kUndecided, AgreementCategory::kDisagree}) {
    table.categories.emplace_back(to_string(c));
  }
  for (const LexiconTerm& term : lexicon.terms) {
    std::vector<std::size_t> row(3, 0);
    for (const TermRating& r : lexicon.ratings) {
      if (r.term_id == term.term_id && r.valence == valence) {
        ++row[static_cast<std::size_t>(categorize_rating(r.score))];
      }
    }
    table.items.push_back(term.term_id);
    table.counts.push_back(std::move(row));
  }
  return table;
}

}  // namespace valence
