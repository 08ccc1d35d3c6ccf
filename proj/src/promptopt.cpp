#include "valence/promptopt.hpp"

#include <algorithm>
#include <set>

#include "valence/util/random.hpp"

namespace valence {

namespace {

TemplateKind body_kind(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kInstruction:
      return TemplateKind::kAnchored;
    case TemplateKind::kInstructionPrimed:
      return TemplateKind::kPrimed;
    default:
      throw ValidationError("prompt optimization needs an instruction template kind, got '" +
                            std::string(to_string(kind)) + "'");
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

struct Score {
  std::size_t correct = 0;
  std::size_t failures = 0;
  std::size_t n = 0;
  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

Score score_candidate(const PromptCandidate& candidate, std::span<const LabeledChunk> items,
                      std::span<const std::size_t> indices, Backend& backend,
                      const OptOptions& options) {
  Score s;
  s.n = indices.size();
  for (std::size_t i : indices) {
    const LabeledChunk& item = items[i];
    try {
      const Predicted p =
          classify_prompt(backend, candidate_prompt(candidate, item.chunk, options.kind), options.classify);
      if (p && *p == item.gold) ++s.correct;
    } catch (const BackendError&) {
      ++s.failures;
    }
  }
  return s;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::string candidate_id(std::size_t instruction, std::span<const std::size_t> demos) {
  std::string id = "i" + std::to_string(instruction);
  if (!demos.empty()) {
    id += "+d";
    for (std::size_t i = 0; i < demos.size(); ++i) {
      if (i) id += ",";
      id += std::to_string(demos[i]);
    }
  }
  return id;
}

}  // namespace

void OptBudget::validate() const {
  if (trials < 1) throw ValidationError("optimizer trials must be at least 1");
  if (minibatch_size < 1) throw ValidationError("optimizer minibatch_size must be at least 1");
}

OptBudget OptBudget::from_preset(std::string_view preset, std::uint64_t seed) {
  OptBudget b;
  b.preset = std::string(preset);
  b.seed = seed;
  if (preset == "light") {
    b.trials = 10;
    b.n_candidate_demos = 8;
  } else if (preset == "medium") {
    b.trials = 25;
    b.n_candidate_demos = 17;
  } else if (preset == "heavy") {
    b.trials = 50;
    b.n_candidate_demos = 38;
  } else {
    throw ValidationError("unknown optimizer preset '" + std::string(preset) +
                          "' (expected light, medium or heavy)");
  }
  b.minibatch_size = 25;
  return b;
}

std::string assemble_prompt(std::span<const Demo> demos, const std::string& query) {
  std::string out;
  for (const Demo& d : demos) {
    out += d.prompt;
    out += "\nLabel: ";
    out += to_string(d.label);
    out += "\n\n";
  }
  out += query;
  return out;
}

std::string candidate_prompt(const PromptCandidate& candidate, const Chunk& chunk, TemplateKind kind) {
  body_kind(kind);
  PromptTemplate tmpl;
  tmpl.kind = kind;
  tmpl.instruction_text = candidate.instruction;
  return assemble_prompt(candidate.demos, render_chunk(chunk, tmpl));
}

std::vector<Demo> bootstrap_demos(std::span<const LabeledChunk> train, Backend& backend,
                                  std::size_t n, std::uint64_t seed,
                                  const std::string& instruction, const OptOptions& options,
                                  std::vector<std::string>* warnings) {
  if (train.empty()) throw DomainError("cannot bootstrap demos from an empty training split");
  PromptTemplate body;
  body.kind = body_kind(options.kind);
  const PromptCandidate bare{"seed", instruction, {}};
  std::vector<Demo> pool;
  std::size_t failures = 0;
  for (std::size_t i : Rng(seed).permutation(train.size())) {
    if (pool.size() >= n) break;
    const LabeledChunk& item = train[i];
    try {
      const Predicted p = classify_prompt(backend, candidate_prompt(bare, item.chunk, options.kind),
                                          options.classify);
      if (p && *p == item.gold) pool.push_back({render_chunk(item.chunk, body), item.gold, item.chunk.chunk_id});
    } catch (const BackendError&) {
      ++failures;
    }
  }
  if (warnings) {
    if (n > 0 && pool.empty()) warnings->push_back("no training example was labeled correctly; demo pool is empty");
    if (failures) warnings->push_back(std::to_string(failures) + " backend failures while bootstrapping demos");
  }
  return pool;
}

std::vector<std::string> propose_instructions(std::span<const std::string> seeds, Backend& backend,
                                              std::size_t k, std::vector<std::string>* warnings) {
  if (seeds.empty()) throw ValidationError("at least one seed instruction is required");
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const std::string& s : seeds) {
    if (trim(s).empty()) throw ValidationError("seed instructions must be non-empty");
    if (seen.insert(s).second) out.push_back(s);
  }
  if (k == 0 || !backend.supports(Capability::kGenerate)) return out;
  for (std::size_t i = 0; i < k; ++i) {
    const std::string& base = seeds[i % seeds.size()];
    const std::string meta =
        "Rewrite the following instruction for labeling clinical note chunks as stigmatizing, "
        "privileging or neutral. Reply with the new instruction only.\nInstruction: " +
        base + "\nVariant " + std::to_string(i + 1) + ":";
    try {
      const std::string text = trim(backend.generate({meta, 256, 0.0, 42 + i}));
      if (!text.empty() && seen.insert(text).second) out.push_back(text);
    } catch (const BackendError& e) {
      if (warnings) warnings->push_back(std::string("instruction proposal failed: ") + e.what());
    }
  }
  return out;
}

OptResult optimize(std::span<const LabeledChunk> train, std::span<const LabeledChunk> dev,
                   const OptBudget& budget, Backend& backend, const OptOptions& options) {
  budget.validate();
  body_kind(options.kind);
  if (dev.empty()) throw DomainError("optimization needs a non-empty dev split");

  OptResult result;
  result.budget = budget;
  result.instructions = propose_instructions(options.seed_instructions, backend, budget.n_proposals,
                                             &result.warnings);
  result.demo_pool = bootstrap_demos(train, backend, budget.n_candidate_demos,
                                     mix_seed(budget.seed, "demos"), result.instructions.front(),
                                     options, &result.warnings);

  const std::size_t n_instr = result.instructions.size();
  const std::size_t demo_cap = std::min(budget.max_demos, result.demo_pool.size());
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < budget.trials; ++t) {
    Rng rng(mix_seed(budget.seed, t));
    TrialLog log;
    log.trial = t;
    if (t < n_instr) {
      // Every instruction is tried once without demos before random draws.
      log.instruction_index = t;
    } else {
      log.instruction_index = static_cast<std::size_t>(rng.below(n_instr));
      const auto m = static_cast<std::size_t>(rng.below(demo_cap + 1));
      auto perm = rng.permutation(result.demo_pool.size());
      log.demo_indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(m));
      std::sort(log.demo_indices.begin(), log.demo_indices.end());
    }
    log.candidate_id = candidate_id(log.instruction_index, log.demo_indices);

    PromptCandidate cand{log.candidate_id, result.instructions[log.instruction_index], {}};
    for (std::size_t d : log.demo_indices) cand.demos.push_back(result.demo_pool[d]);

    auto batch = Rng(mix_seed(mix_seed(budget.seed, "minibatch"), t)).permutation(dev.size());
    batch.resize(std::min(budget.minibatch_size, dev.size()));
    const Score s = score_candidate(cand, dev, batch, backend, options);
    log.score = s.accuracy();
    log.failures = s.failures;
    log.aborted = 2 * s.failures > batch.size();
    if (log.aborted) {
      result.warnings.push_back("trial " + std::to_string(t) + " aborted after " +
                                std::to_string(s.failures) + " backend failures");
    } else if (!best || log.score > result.trials[*best].score) {
      best = result.trials.size();
      result.best = std::move(cand);
      result.best_trial = t;
    }
    result.trials.push_back(std::move(log));
  }
  if (!best) throw BackendError(BackendError::Kind::kServer, "every optimization trial was aborted");

  const auto all = iota(dev.size());
  result.dev_score = score_candidate(result.best, dev, all, backend, options).accuracy();
  const PromptCandidate seed_candidate{"i0", result.instructions.front(), {}};
  result.baseline_score = score_candidate(seed_candidate, dev, all, backend, options).accuracy();
  result.no_improvement = !(result.dev_score > result.baseline_score);
  return result;
}

Json to_json(const OptResult& r) {
  Json demos = Json::array();
  for (const Demo& d : r.best.demos) {
    demos.push_back({{"chunk_id", d.chunk_id}, {"prompt", d.prompt}, {"label", to_string(d.label)}});
  }
  Json trials = Json::array();
  for (const TrialLog& t : r.trials) {
    trials.push_back({{"trial", t.trial},
                      {"candidate_id", t.candidate_id},
                      {"instruction_index", t.instruction_index},
                      {"demo_indices", t.demo_indices},
                      {"score", t.score},
                      {"failures", t.failures},
                      {"aborted", t.aborted}});
  }
  return {{"best",
           {{"id", r.best.id}, {"instruction", r.best.instruction}, {"demos", demos}}},
          {"best_trial", r.best_trial},
          {"dev_score", r.dev_score},
          {"baseline_score", r.baseline_score},
          {"no_improvement", r.no_improvement},
          {"trials", trials},
          {"instructions", r.instructions},
          {"demo_pool_size", r.demo_pool.size()},
          {"warnings", r.warnings},
          {"budget",
           {{"preset", r.budget.preset},
            {"trials", r.budget.trials},
            {"minibatch_size", r.budget.minibatch_size},
            {"n_candidate_demos", r.budget.n_candidate_demos},
            {"max_demos", r.budget.max_demos},
            {"seed", r.budget.seed}}}};
}

}  // namespace valence
