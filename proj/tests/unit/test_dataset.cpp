#include <map>

#include "doctest.h"
#include "valence/dataset.hpp"
#include "valence/error.hpp"

using namespace valence;

namespace {

AnnotationRecord rec(const std::string& chunk, const std::string& who, ValenceLabel l) {
  return {chunk, who, l, ""};
}

std::vector<LabeledChunk> labeled(std::size_t n) {
  std::vector<LabeledChunk> out;
  for (std::size_t i = 0; i < n; ++i) {
    LabeledChunk l;
    l.chunk.chunk_id = "c" + std::to_string(1000 + i);
    l.chunk.term_id = "t" + std::to_string(i % 4);
    l.gold = static_cast<ValenceLabel>(i % 5 == 0 ? 0 : (i % 5 < 3 ? 1 : 2));
    out.push_back(l);
  }
  return out;
}

}  // namespace

TEST_CASE("majority gold with tie escalation") {
  using L = ValenceLabel;
  const std::vector<AnnotationRecord> two_one = {rec("c", "a", L::kNeutral), rec("c", "b", L::kNeutral),
                                                 rec("c", "d", L::kPrivileging)};
  const GoldResolution g = resolve_gold(two_one, GoldRule::kUnanimousOrMajority);
  CHECK(g.gold == L::kNeutral);
  CHECK(g.provenance == "adjudicated:majority");
  const std::vector<AnnotationRecord> tie = {rec("c", "a", L::kNeutral), rec("c", "b", L::kPrivileging)};
  CHECK(resolve_gold(tie, GoldRule::kUnanimousOrMajority).unresolved());
  CHECK_THROWS_AS(resolve_gold(tie, GoldRule::kSingleAnnotator), DomainError);
  CHECK_THROWS_AS(resolve_gold({}, GoldRule::kUnanimousOrMajority), DomainError);

  const std::vector<AnnotationRecord> mixed = {rec("x", "a", L::kNeutral), rec("y", "a", L::kStigmatizing),
                                               rec("y", "b", L::kStigmatizing)};
  const auto all = resolve_all(mixed);
  CHECK(all.at("x").provenance == "single");
  CHECK(all.at("y").gold == L::kStigmatizing);
}

TEST_CASE("split sizes round dev and test") {
  CHECK(split_sizes(300, {}) == SplitSizes{180, 60, 60});
  CHECK(split_sizes(10, {}) == SplitSizes{6, 2, 2});
  CHECK(split_sizes(7, {}) == SplitSizes{5, 1, 1});
  CHECK(split_sizes(0, {}) == SplitSizes{0, 0, 0});
  SplitSpec bad;
  bad.train = 0.7;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("split partitions every chunk exactly once") {
  const auto data = labeled(101);
  for (Stratify s : {Stratify::kLabel, Stratify::kTerm, Stratify::kNone}) {
    SplitSpec spec;
    spec.stratify_by = s;
    const DatasetSplit split = split_dataset(data, spec);
    const SplitSizes sizes = split_sizes(data.size(), spec);
    CHECK(split.train.size() == sizes.train);
    CHECK(split.dev.size() == sizes.dev);
    CHECK(split.test.size() == sizes.test);
    std::map<std::string, int> seen;
    for (const auto* part : {&split.train, &split.dev, &split.test}) {
      for (const LabeledChunk& l : *part) ++seen[l.chunk.chunk_id];
      for (std::size_t i = 1; i < part->size(); ++i) CHECK((*part)[i - 1].chunk.chunk_id < (*part)[i].chunk.chunk_id);
    }
    CHECK(seen.size() == data.size());
    for (const auto& [id, n] : seen) CHECK(n == 1);
  }
}

TEST_CASE("label-stratified split stays within one of the proportional share") {
  const auto data = labeled(97);
  const DatasetSplit split = split_dataset(data, SplitSpec{});
  std::array<std::size_t, kNumLabels> total{}, test{};
  for (const auto& l : data) ++total[index_of(l.gold)];
  for (const auto& l : split.test) ++test[index_of(l.gold)];
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double want = static_cast<double>(total[k]) * static_cast<double>(split.test.size()) / 97.0;
    CHECK(std::abs(static_cast<double>(test[k]) - want) <= 1.0);
  }
}

TEST_CASE("split is seeded") {
  const auto data = labeled(50);
  SplitSpec a, b;
  b.seed = 43;
  const auto s1 = split_dataset(data, a), s2 = split_dataset(data, a), s3 = split_dataset(data, b);
  auto ids = [](const std::vector<LabeledChunk>& v) {
    std::vector<std::string> out;
    for (const auto& l : v) out.push_back(l.chunk.chunk_id);
    return out;
  };
  CHECK(ids(s1.test) == ids(s2.test));
  CHECK(ids(s1.test) != ids(s3.test));
}

TEST_CASE("overlap selection") {
  std::vector<Chunk> chunks;
  for (int i = 0; i < 12; ++i) {
    Chunk c;
    c.chunk_id = "c" + std::to_string(10 + i);
    c.term_id = i < 9 ? "a" : "b";
    chunks.push_back(c);
  }
  const auto plain = build_overlap(chunks, 5, false, 1);
  CHECK(plain.size() == 5);
  CHECK(plain == build_overlap(chunks, 5, false, 1));
  const auto strat = build_overlap(chunks, 6, true, 1);
  int b = 0;
  for (const auto& id : strat) b += id >= "c19";
  CHECK(b == 3);
  CHECK_THROWS_AS(build_overlap(chunks, 13, false, 1), DomainError);
}

TEST_CASE("label distribution") {
  const auto d = label_distribution(labeled(10));
  CHECK(d[0] + d[1] + d[2] == doctest::Approx(1.0));
  CHECK(d[0] == doctest::Approx(0.2));
  CHECK_THROWS(label_distribution({}));
}
