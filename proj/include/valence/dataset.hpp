#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "valence/extraction.hpp"
#include "valence/label.hpp"

namespace valence {

/// One annotator's label on one chunk.
struct AnnotationRecord {
  std::string chunk_id;
  std::string annotator_id;
  ValenceLabel label = ValenceLabel::kNeutral;
  std::string timestamp;
};

/// A chunk with its gold label. `provenance` is "single" or
/// "adjudicated:<rule>" (e.g. "adjudicated:majority").
struct LabeledChunk {
  Chunk chunk;
  ValenceLabel gold = ValenceLabel::kNeutral;
  std::string provenance = "single";
};

enum class GoldRule { kUnanimousOrMajority, kSingleAnnotator };

struct GoldResolution {
  std::optional<ValenceLabel> gold;  // nullopt when unresolved
  std::string provenance;
  bool unresolved() const noexcept { return !gold.has_value(); }
};

/// Majority rule: the modal label; a tie for the top count is escalated as
/// unresolved. Throws DomainError on an empty record set, and under the
/// single-annotator rule when more than one record is given.
GoldResolution resolve_gold(std::span<const AnnotationRecord> records, GoldRule rule);

/// Groups records by chunk_id and resolves each group. Chunks with a single
/// record resolve as "single"; others use the majority rule.
std::map<std::string, GoldResolution> resolve_all(std::span<const AnnotationRecord> records);

/// Picks k chunk ids. Stratified mode balances across anchor terms
/// round-robin; output follows input order. Throws DomainError if k > |chunks|.
std::vector<std::string> build_overlap(std::span<const Chunk> chunks, std::size_t k,
                                       bool stratify_by_term, std::uint64_t seed);

enum class Stratify { kLabel, kTerm, kNone };

std::string_view to_string(Stratify s) noexcept;
Stratify parse_stratify(std::string_view text);

struct SplitSpec {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
  std::uint64_t seed = 42;
  Stratify stratify_by = Stratify::kLabel;

  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0, dev = 0, test = 0;
  bool operator==(const SplitSizes&) const = default;
};

/// dev = round(n * dev), test = round(n * test), remainder to train.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct DatasetSplit {
  std::vector<LabeledChunk> train, dev, test;
};

/// Seeded partition. Each part keeps input order. Stratified modes hold every
/// stratum within one item of its proportional share.
DatasetSplit split_dataset(std::span<const LabeledChunk> labeled, const SplitSpec& spec);

/// Fractions of each label, indexed by ValenceLabel. Throws on empty input.
std::array<double, kNumLabels> label_distribution(std::span<const LabeledChunk> labeled);

/// Reference label mix observed for the OB-GYN annotations, used as the
/// synthetic corpus default: neutral .54, privileging .269, stigmatizing .187.
inline constexpr std::array<double, kNumLabels> kReferenceLabelMix = {0.187, 0.269, 0.54};

}  // namespace valence
