#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "valence/backends.hpp"
#include "valence/dataset.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

/// A solved training example shown before the query.
struct Demo {
  std::string prompt;  // rendered body, without instruction
  ValenceLabel label = ValenceLabel::kNeutral;
  std::string chunk_id;
};

struct PromptCandidate {
  std::string id;
  std::string instruction;
  std::vector<Demo> demos;
};

struct OptBudget {
  std::string preset = "medium";
  std::size_t trials = 25;
  std::size_t minibatch_size = 25;
  std::size_t n_candidate_demos = 17;
  std::size_t max_demos = 4;
  std::size_t n_proposals = 4;
  std::uint64_t seed = 42;

  void validate() const;
  /// light = (10 trials, 25, 8 demos), medium = (25, 25, 17), heavy = (50, 25, 38).
  static OptBudget from_preset(std::string_view preset, std::uint64_t seed = 42);
};

struct OptOptions {
  /// Instruction kind used for every candidate (instruction or
  /// instruction_primed).
  TemplateKind kind = TemplateKind::kInstructionPrimed;
  ClassifyOptions classify;  // mode, verbalizer, mask token
  std::vector<std::string> seed_instructions;
};

struct TrialLog {
  std::size_t trial = 0;
  std::string candidate_id;
  std::size_t instruction_index = 0;
  std::vector<std::size_t> demo_indices;
  double score = 0.0;
  std::size_t failures = 0;
  bool aborted = false;
};

struct OptResult {
  PromptCandidate best;
  std::size_t best_trial = 0;
  std::vector<TrialLog> trials;
  double dev_score = 0.0;       // winner on the full dev set
  double baseline_score = 0.0;  // first seed instruction, no demos, full dev set
  bool no_improvement = false;
  std::vector<std::string> instructions;
  std::vector<Demo> demo_pool;
  std::vector<std::string> warnings;
  OptBudget budget;
};

/// Blank-line separated "{prompt}\nLabel: {label}" blocks followed by the
/// query prompt.
std::string assemble_prompt(std::span<const Demo> demos, const std::string& query);

/// Query prompt for one chunk under a candidate.
std::string candidate_prompt(const PromptCandidate& candidate, const Chunk& chunk, TemplateKind kind);

/// Walks a seeded permutation of `train`, keeping examples the backend already
/// labels correctly under `instruction`, until `n` are kept. Throws
/// DomainError on an empty training split.
std::vector<Demo> bootstrap_demos(std::span<const LabeledChunk> train, Backend& backend,
                                  std::size_t n, std::uint64_t seed,
                                  const std::string& instruction, const OptOptions& options,
                                  std::vector<std::string>* warnings = nullptr);

/// Seeds first, then up to k distinct paraphrases requested from a
/// generate-capable backend. Failed requests are noted and skipped.
std::vector<std::string> propose_instructions(std::span<const std::string> seeds, Backend& backend,
                                              std::size_t k,
                                              std::vector<std::string>* warnings = nullptr);

/// Seeded random search over (instruction, demo subset) pairs scored by exact
/// match on dev mini-batches; the winner is re-scored on the full dev set.
OptResult optimize(std::span<const LabeledChunk> train, std::span<const LabeledChunk> dev,
                   const OptBudget& budget, Backend& backend, const OptOptions& options);

Json to_json(const OptResult& result);

}  // namespace valence
