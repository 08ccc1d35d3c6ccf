#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valence/dataset.hpp"
#include "valence/lexicon.hpp"

namespace valence {

/// Items x categories count table: counts[i][k] raters put item i in
/// category k. Category order matters for the ordinal weight schemes.
struct RatingTable {
  std::vector<std::string> items;
  std::vector<std::string> categories;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t raters(std::size_t item) const;
  void validate() const;
};

enum class WeightScheme { kIdentity, kLinear, kQuadratic };

std::string_view to_string(WeightScheme scheme) noexcept;
WeightScheme parse_weight_scheme(std::string_view text);

/// w[k][l] for q categories: identity, 1 - |k-l|/(q-1), or 1 - (k-l)^2/(q-1)^2.
std::vector<std::vector<double>> weight_matrix(WeightScheme scheme, std::size_t q);

/// Mean over items with >= 2 raters of the share of agreeing rater pairs.
/// Items with fewer raters are skipped (and noted in `warnings`); throws
/// DomainError when none remain.
double percent_agreement(const RatingTable& table, std::vector<std::string>* warnings = nullptr);

/// Gwet's multi-rater agreement coefficient. Identity weights give AC1,
/// ordinal weights AC2. Single-rater items enter the category prevalences but
/// not the observed agreement. Throws DomainError when the chance agreement
/// is 1 or the table has no multiply-rated item or fewer than 2 categories.
double gwet_ac(const RatingTable& table, WeightScheme scheme);

/// Landis-Koch style label for a coefficient (cosmetic).
std::string_view benchmark_label(double coefficient) noexcept;

struct AgreementReport {
  double percent_agreement = 0.0;
  double gwet_ac = 0.0;
  WeightScheme scheme = WeightScheme::kIdentity;
  std::size_t n_items = 0;
  std::size_t n_categories = 0;
  std::string benchmark;
};

/// Table over chunks labeled by at least two annotators, categories in the
/// given order. Throws DomainError when no chunk is multiply annotated.
RatingTable table_from_annotations(std::span<const AnnotationRecord> records,
                                   std::span<const ValenceLabel> category_order);

AgreementReport agreement_from_annotations(std::span<const AnnotationRecord> records,
                                           std::span<const ValenceLabel> category_order,
                                           WeightScheme scheme = WeightScheme::kIdentity);

/// Lexicon ratings for one valence collapsed into agree/undecided/disagree,
/// one item per term.
RatingTable lexicon_agreement_table(const Lexicon& lexicon, Valence valence);

}  // namespace valence
