#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "valence/backends.hpp"
#include "valence/baseline.hpp"
#include "valence/dataset.hpp"
#include "valence/extraction.hpp"
#include "valence/prompting.hpp"
#include "valence/synth.hpp"
#include "valence/util/jsonl.hpp"

namespace valence {

namespace fs = std::filesystem;

/// Seed and config fingerprint stamped into every artifact a stage writes.
struct StageContext {
  std::uint64_t seed = 42;  // already derived for the stage
  std::string config_hash;
};

struct ManifestEntry {
  std::string stage;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // file name -> sha256
  std::map<std::string, std::string> outputs;  // file name -> sha256
};

struct Manifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> stages;
};

Json to_json(const ManifestEntry& entry);
Json to_json(const Manifest& manifest);
Manifest manifest_from_json(const Json& json);

/// Canonical stage order of a full run.
inline constexpr std::array<std::string_view, 8> kPipelineStages = {
    "synth", "extract", "sample", "split", "train", "classify", "eval", "report"};

/// Seed of one stage, derived from the global seed by name.
std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) noexcept;

// Individual stages. Each reads its inputs (DependencyError when one is
// missing, naming the stage that produces it), writes its outputs with a
// provenance header, and returns the manifest entry.

ManifestEntry stage_lexicon(const fs::path& terms, const fs::path& ratings, const LexiconConfig& config,
                            const fs::path& assignments_out, const StageContext& ctx);

ManifestEntry stage_synth(const SynthSpec& spec, const fs::path& lexicon_terms, const fs::path& notes_out,
                          const fs::path& gold_out, const StageContext& ctx);

ManifestEntry stage_extract(const fs::path& notes_in, const fs::path& lexicon_terms, std::size_t window,
                            const fs::path& chunks_out, const StageContext& ctx);

ManifestEntry stage_sample(const fs::path& chunks_in, const SampleStrategy& strategy,
                           const fs::path& sampled_out, const StageContext& ctx);

/// Labels come either from per-note gold (synthetic runs) or from an
/// annotation export of labeled chunks.
struct SplitOutputs {
  fs::path train, dev, test;
};

ManifestEntry stage_split(const fs::path& chunks_in, const fs::path& labels_in, const SplitSpec& spec,
                          const SplitOutputs& out, const StageContext& ctx);

ManifestEntry stage_train(const fs::path& train_in, const std::optional<fs::path>& dev_in,
                          const PromptTemplate& tmpl, const TrainConfig& config, const fs::path& model_out,
                          const StageContext& ctx);

ManifestEntry stage_classify(const fs::path& split_in, Backend& backend, const ClassifyOptions& options,
                             const fs::path& predictions_out, const StageContext& ctx,
                             const std::vector<fs::path>& extra_inputs = {});

ManifestEntry stage_eval(const fs::path& predictions_in, std::size_t replicates, std::size_t threads,
                         const fs::path& eval_out, const StageContext& ctx);

struct ReportInputs {
  fs::path eval;
  fs::path predictions;
  fs::path labeled;  // chunks the predictions refer to
  fs::path lexicon_terms;
  std::optional<fs::path> lexicon_ratings;
  std::optional<fs::path> external_eval;  // for the cross-domain comparison
};

struct ReportOutputs {
  fs::path report;      // JSON
  fs::path plot_csv;    // valence plot data
};

ManifestEntry stage_report(const ReportInputs& in, const ReportOutputs& out, const StageContext& ctx);

struct PipelineConfig {
  fs::path out_dir = "run";
  std::uint64_t seed = 42;
  fs::path lexicon_terms = "data/lexicon/terms.tsv";
  std::optional<fs::path> lexicon_ratings = fs::path("data/lexicon/ratings.tsv");
  SynthSpec synth;
  std::size_t window = kDefaultWindow;
  SampleStrategy sample = SampleStrategy::total(static_cast<std::size_t>(-1));
  SplitSpec split;
  TemplateKind template_kind = TemplateKind::kClozePrimed;
  std::string verbalizer = "single_word";
  TrainConfig train;
  std::size_t bootstrap_replicates = 1000;
  std::size_t threads = 0;

  /// Hash of every setting that affects artifact contents (paths excluded).
  std::string hash() const;
  Json to_json() const;
  static PipelineConfig from_json(const Json& json, const PipelineConfig& defaults);
  static PipelineConfig from_json(const Json& json) { return from_json(json, PipelineConfig{}); }
};

/// Canonical artifact paths inside the run directory.
struct RunLayout {
  fs::path dir;
  fs::path notes() const { return dir / "notes.jsonl"; }
  fs::path gold() const { return dir / "gold.jsonl"; }
  fs::path chunks() const { return dir / "chunks.jsonl"; }
  fs::path sampled() const { return dir / "sampled.jsonl"; }
  fs::path train() const { return dir / "train.jsonl"; }
  fs::path dev() const { return dir / "dev.jsonl"; }
  fs::path test() const { return dir / "test.jsonl"; }
  fs::path model() const { return dir / "model.json"; }
  fs::path predictions() const { return dir / "predictions.jsonl"; }
  fs::path eval() const { return dir / "eval.json"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path plot_csv() const { return dir / "valence_plot.csv"; }
  fs::path manifest() const { return dir / "manifest.json"; }
};

/// Adds or replaces `entry` in the manifest of config.out_dir. A manifest
/// written under a different config hash or seed is started afresh.
void record_manifest(const PipelineConfig& config, const ManifestEntry& entry);

/// Runs one named stage of the canonical pipeline inside config.out_dir and
/// records it in the run manifest.
ManifestEntry run_stage(const PipelineConfig& config, std::string_view stage);

/// Runs the given stages (all eight by default) in canonical order.
Manifest run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages = {});

}  // namespace valence
