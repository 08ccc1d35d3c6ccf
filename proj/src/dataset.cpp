#include "valence/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "valence/error.hpp"
#include "valence/util/quota.hpp"
#include "valence/util/random.hpp"

namespace valence {

GoldResolution resolve_gold(std::span<const AnnotationRecord> records, GoldRule rule) {
  if (records.empty()) throw DomainError("cannot resolve gold from an empty record set");
  if (rule == GoldRule::kSingleAnnotator) {
    if (records.size() != 1) {
      throw DomainError("single-annotator rule given " + std::to_string(records.size()) +
                        " records for chunk '" + records.front().chunk_id + "'");
    }
    return {records.front().label, "single"};
  }
  if (records.size() == 1) return {records.front().label, "single"};

  std::array<std::size_t, kNumLabels> counts{};
  for (const AnnotationRecord& r : records) ++counts[index_of(r.label)];
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  std::optional<ValenceLabel> winner;
  std::size_t n_top = 0;
  for (ValenceLabel label : kAllLabels) {
    if (counts[index_of(label)] == top) {
      ++n_top;
      winner = label;
    }
  }
  if (n_top > 1) return {std::nullopt, "unresolved"};
  return {winner, top == records.size() ? "adjudicated:unanimous" : "adjudicated:majority"};
}

std::map<std::string, GoldResolution> resolve_all(std::span<const AnnotationRecord> records) {
  std::map<std::string, std::vector<AnnotationRecord>> grouped;
  for (const AnnotationRecord& r : records) grouped[r.chunk_id].push_back(r);
  std::map<std::string, GoldResolution> out;
  for (const auto& [chunk_id, group] : grouped) {
    out.emplace(chunk_id, resolve_gold(group, GoldRule::kUnanimousOrMajority));
  }
  return out;
}

std::vector<std::string> build_overlap(std::span<const Chunk> chunks, std::size_t k,
                                       bool stratify_by_term, std::uint64_t seed) {
  if (k > chunks.size()) {
    throw DomainError("overlap size " + std::to_string(k) + " exceeds pool of " +
                      std::to_string(chunks.size()) + " chunks");
  }
  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (!stratify_by_term) {
    chosen = rng.permutation(chunks.size());
    chosen.resize(k);
  } else {
    std::vector<std::string> terms;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      auto [it, inserted] = groups.try_emplace(chunks[i].term_id);
      if (inserted) terms.push_back(chunks[i].term_id);
      it->second.push_back(i);
    }
    rng.shuffle(terms);
    for (auto& [term, members] : groups) rng.shuffle(members);
    std::map<std::string, std::size_t> cursor;
    while (chosen.size() < k) {
      for (const std::string& term : terms) {
        if (chosen.size() == k) break;
        std::size_t& c = cursor[term];
        const auto& members = groups[term];
        if (c < members.size()) chosen.push_back(members[c++]);
      }
    }
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> ids;
  ids.reserve(chosen.size());
  for (std::size_t i : chosen) ids.push_back(chunks[i].chunk_id);
  return ids;
}

std::string_view to_string(Stratify s) noexcept {
  switch (s) {
    case Stratify::kLabel:
      return "label";
    case Stratify::kTerm:
      return "term";
    case Stratify::kNone:
      return "none";
  }
  return "none";
}

Stratify parse_stratify(std::string_view text) {
  if (text == "label") return Stratify::kLabel;
  if (text == "term") return Stratify::kTerm;
  if (text == "none") return Stratify::kNone;
  throw ValidationError("unknown stratification '" + std::string(text) + "'");
}

void SplitSpec::validate() const {
  for (double f : {train, dev, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + dev + test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto round_share = [n](double f) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(n) * f));
  };
  SplitSizes s;
  s.dev = std::min(n, round_share(spec.dev));
  s.test = std::min(n - s.dev, round_share(spec.test));
  s.train = n - s.dev - s.test;
  return s;
}

DatasetSplit split_dataset(std::span<const LabeledChunk> labeled, const SplitSpec& spec) {
  const SplitSizes sizes = split_sizes(labeled.size(), spec);
  Rng rng(spec.seed);

  // 0 = train, 1 = dev, 2 = test for every input index.
  std::vector<int> part(labeled.size(), 0);

  if (spec.stratify_by == Stratify::kNone) {
    const std::vector<std::size_t> perm = rng.permutation(labeled.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      part[perm[k]] = k < sizes.dev ? 1 : (k < sizes.dev + sizes.test ? 2 : 0);
    }
  } else {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      const std::string key = spec.stratify_by == Stratify::kLabel
                                  ? std::string(to_string(labeled[i].gold))
                                  : labeled[i].chunk.term_id;
      groups[key].push_back(i);
    }
    std::vector<std::vector<std::size_t>*> members;
    std::vector<std::size_t> caps;
    std::vector<double> dev_targets, test_targets;
    for (auto& [key, idx] : groups) {
      rng.shuffle(idx);
      members.push_back(&idx);
      caps.push_back(idx.size());
      dev_targets.push_back(static_cast<double>(idx.size()) * spec.dev);
      test_targets.push_back(static_cast<double>(idx.size()) * spec.test);
    }
    const std::vector<std::size_t> dev_q = allocate_quota(dev_targets, caps, sizes.dev);
    std::vector<std::size_t> remaining(caps.size());
    for (std::size_t g = 0; g < caps.size(); ++g) remaining[g] = caps[g] - dev_q[g];
    const std::vector<std::size_t> test_q = allocate_quota(test_targets, remaining, sizes.test);
    for (std::size_t g = 0; g < members.size(); ++g) {
      const auto& idx = *members[g];
      for (std::size_t k = 0; k < idx.size(); ++k) {
        part[idx[k]] = k < dev_q[g] ? 1 : (k < dev_q[g] + test_q[g] ? 2 : 0);
      }
    }
  }

  DatasetSplit out;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    (part[i] == 0 ? out.train : part[i] == 1 ? out.dev : out.test).push_back(labeled[i]);
  }
  return out;
}

std::array<double, kNumLabels> label_distribution(std::span<const LabeledChunk> labeled) {
  if (labeled.empty()) throw DomainError("label distribution of an empty set");
  std::array<std::size_t, kNumLabels> counts{};
  for (const LabeledChunk& l : labeled) ++counts[index_of(l.gold)];
  std::array<double, kNumLabels> out{};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    out[k] = static_cast<double>(counts[k]) / static_cast<double>(labeled.size());
  }
  return out;
}

}  // namespace valence
