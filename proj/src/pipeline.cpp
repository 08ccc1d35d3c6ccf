#include "valence/pipeline.hpp"

#include <algorithm>

#include "valence/agreement.hpp"
#include "valence/eval.hpp"
#include "valence/records.hpp"
#include "valence/util/hashing.hpp"
#include "valence/util/random.hpp"

namespace valence {

namespace {

void require_input(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw DependencyError("missing input " + path.string() + "; run the '" + std::string(producer) +
                          "' stage first");
  }
}

std::string name_of(const fs::path& p) { return p.filename().string(); }

ManifestEntry begin_entry(std::string_view stage, const StageContext& ctx,
                          std::initializer_list<fs::path> inputs) {
  ManifestEntry e;
  e.stage = std::string(stage);
  e.seed = ctx.seed;
  for (const fs::path& p : inputs) e.inputs[name_of(p)] = sha256_file(p);
  return e;
}

Json provenance(const ManifestEntry& e, const StageContext& ctx) {
  return {{"stage", e.stage}, {"seed", e.seed}, {"config_hash", ctx.config_hash}, {"inputs", e.inputs}};
}

void finish(ManifestEntry& e, std::initializer_list<fs::path> outputs) {
  for (const fs::path& p : outputs) e.outputs[name_of(p)] = sha256_file(p);
}

std::vector<LabeledChunk> read_labeled(const fs::path& path) {
  return from_json_records(read_jsonl(path).records, labeled_from_json, path.string());
}

Json lexicon_agreement(const Lexicon& lex) {
  Json out = Json::object();
  for (Valence v : {Valence::kStigmatizing, Valence::kPrivileging}) {
    try {
      const RatingTable table = lexicon_agreement_table(lex, v);
      out[std::string(to_string(v))] = {{"percent_agreement", percent_agreement(table)},
                                        {"gwet_ac1", gwet_ac(table, WeightScheme::kIdentity)},
                                        {"gwet_ac2_linear", gwet_ac(table, WeightScheme::kLinear)},
                                        {"items", table.items.size()}};
    } catch (const DomainError& e) {
      out[std::string(to_string(v))] = {{"unavailable", e.what()}};
    }
  }
  return out;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t global_seed, std::string_view stage) noexcept {
  return mix_seed(global_seed, stage);
}

Json to_json(const ManifestEntry& e) {
  return {{"stage", e.stage}, {"seed", e.seed}, {"inputs", e.inputs}, {"outputs", e.outputs}};
}

Json to_json(const Manifest& m) {
  Json stages = Json::array();
  for (const ManifestEntry& e : m.stages) stages.push_back(to_json(e));
  return {{"config_hash", m.config_hash}, {"seed", m.seed}, {"stages", stages}};
}

Manifest manifest_from_json(const Json& json) {
  Manifest m;
  m.config_hash = require_field<std::string>(json, "config_hash");
  m.seed = require_field<std::uint64_t>(json, "seed");
  for (const Json& s : require_field<Json>(json, "stages")) {
    m.stages.push_back({require_field<std::string>(s, "stage"), require_field<std::uint64_t>(s, "seed"),
                        require_field<std::map<std::string, std::string>>(s, "inputs"),
                        require_field<std::map<std::string, std::string>>(s, "outputs")});
  }
  return m;
}

ManifestEntry stage_lexicon(const fs::path& terms, const fs::path& ratings, const LexiconConfig& config,
                            const fs::path& assignments_out, const StageContext& ctx) {
  require_input(terms, "lexicon data");
  require_input(ratings, "lexicon data");
  ManifestEntry e = begin_entry("lexicon", ctx, {terms, ratings});
  const Lexicon lex = load_lexicon(terms, ratings);
  std::vector<std::string> warnings = lex.warnings;
  const auto assignments = score_lexicon(lex, config, &warnings);
  const auto included = std::count_if(assignments.begin(), assignments.end(),
                                      [](const ValenceAssignment& a) { return a.included; });
  Json header = provenance(e, ctx);
  header["threshold"] = config.inclusion_threshold;
  header["terms"] = assignments.size();
  header["included"] = included;
  header["warnings"] = warnings;
  header["agreement"] = lexicon_agreement(lex);
  write_jsonl(assignments_out, header, to_json_records(assignments));
  finish(e, {assignments_out});
  return e;
}

ManifestEntry stage_synth(const SynthSpec& spec, const fs::path& lexicon_terms, const fs::path& notes_out,
                          const fs::path& gold_out, const StageContext& ctx) {
  require_input(lexicon_terms, "lexicon data");
  ManifestEntry e = begin_entry("synth", ctx, {lexicon_terms});
  const Lexicon lex = load_lexicon(lexicon_terms);
  const SynthCorpus corpus = synth_corpus(spec, lex.terms, ctx.seed);
  const Json header = provenance(e, ctx);
  write_jsonl(notes_out, header, to_json_records(corpus.notes));
  write_jsonl(gold_out, header, to_json_records(corpus.gold));
  finish(e, {notes_out, gold_out});
  return e;
}

ManifestEntry stage_extract(const fs::path& notes_in, const fs::path& lexicon_terms, std::size_t window,
                            const fs::path& chunks_out, const StageContext& ctx) {
  require_input(notes_in, "synth");
  require_input(lexicon_terms, "lexicon data");
  ManifestEntry e = begin_entry("extract", ctx, {notes_in, lexicon_terms});
  const auto notes = from_json_records(read_jsonl(notes_in).records, note_from_json, notes_in.string());
  const Lexicon lex = load_lexicon(lexicon_terms);
  const auto matchers = compile_matchers(lex.terms);
  const auto chunks = extract_all(notes, matchers, window);
  Json header = provenance(e, ctx);
  header["window"] = window;
  header["notes"] = notes.size();
  write_jsonl(chunks_out, header, to_json_records(chunks));
  finish(e, {chunks_out});
  return e;
}

ManifestEntry stage_sample(const fs::path& chunks_in, const SampleStrategy& strategy,
                           const fs::path& sampled_out, const StageContext& ctx) {
  require_input(chunks_in, "extract");
  ManifestEntry e = begin_entry("sample", ctx, {chunks_in});
  const auto chunks = from_json_records(read_jsonl(chunks_in).records, chunk_from_json, chunks_in.string());
  const auto sampled = sample_chunks(chunks, strategy, ctx.seed);
  Json header = provenance(e, ctx);
  header["strategy"] = {{"kind", strategy.kind == SampleStrategy::Kind::kPerKeyword ? "per_keyword" : "total"},
                        {"n", strategy.n},
                        {"stratify_by_term", strategy.stratify_by_term}};
  write_jsonl(sampled_out, header, to_json_records(sampled));
  finish(e, {sampled_out});
  return e;
}

ManifestEntry stage_split(const fs::path& chunks_in, const fs::path& labels_in, const SplitSpec& spec,
                          const SplitOutputs& out, const StageContext& ctx) {
  require_input(chunks_in, "sample");
  require_input(labels_in, "synth");
  ManifestEntry e = begin_entry("split", ctx, {chunks_in, labels_in});
  const auto chunks = from_json_records(read_jsonl(chunks_in).records, chunk_from_json, chunks_in.string());
  const auto label_records = read_jsonl(labels_in).records;

  std::vector<LabeledChunk> labeled;
  if (!label_records.empty() && label_records.front().contains("chunk_id")) {
    const auto exported = from_json_records(label_records, labeled_from_json, labels_in.string());
    std::map<std::string, const LabeledChunk*> by_id;
    for (const LabeledChunk& l : exported) by_id[l.chunk.chunk_id] = &l;
    for (const Chunk& c : chunks) {
      if (const auto it = by_id.find(c.chunk_id); it != by_id.end()) labeled.push_back(*it->second);
    }
  } else {
    const auto gold = from_json_records(label_records, synth_gold_from_json, labels_in.string());
    labeled = label_chunks(chunks, gold);
  }

  SplitSpec seeded = spec;
  seeded.seed = ctx.seed;
  const DatasetSplit split = split_dataset(labeled, seeded);
  Json header = provenance(e, ctx);
  header["fractions"] = {seeded.train, seeded.dev, seeded.test};
  header["stratify_by"] = to_string(seeded.stratify_by);
  header["sizes"] = {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}};
  header["unlabeled"] = chunks.size() - labeled.size();
  header["split"] = "train";
  write_jsonl(out.train, header, to_json_records(split.train));
  header["split"] = "dev";
  write_jsonl(out.dev, header, to_json_records(split.dev));
  header["split"] = "test";
  write_jsonl(out.test, header, to_json_records(split.test));
  finish(e, {out.train, out.dev, out.test});
  return e;
}

ManifestEntry stage_train(const fs::path& train_in, const std::optional<fs::path>& dev_in,
                          const PromptTemplate& tmpl, const TrainConfig& config, const fs::path& model_out,
                          const StageContext& ctx) {
  require_input(train_in, "split");
  if (dev_in) require_input(*dev_in, "split");
  ManifestEntry e = dev_in ? begin_entry("train", ctx, {train_in, *dev_in}) : begin_entry("train", ctx, {train_in});
  const auto train = render_training_set(read_labeled(train_in), tmpl);
  std::vector<LabeledPrompt> dev;
  if (dev_in) dev = render_training_set(read_labeled(*dev_in), tmpl);
  TrainConfig seeded = config;
  seeded.seed = ctx.seed;
  TrainReport report;
  const BaselineModel model = train_baseline(train, seeded, dev, &report);
  Json out = model_to_json(model);
  out["provenance"] = provenance(e, ctx);
  out["template_kind"] = to_string(tmpl.kind);
  out["training"] = {{"epochs_run", report.epochs_run},
                     {"best_epoch", report.best_epoch},
                     {"best_dev_f1", report.best_dev_f1},
                     {"learning_rate", seeded.learning_rate},
                     {"batch_size", seeded.batch_size},
                     {"patience", seeded.patience}};
  write_json(model_out, out);
  finish(e, {model_out});
  return e;
}

ManifestEntry stage_classify(const fs::path& split_in, Backend& backend, const ClassifyOptions& options,
                             const fs::path& predictions_out, const StageContext& ctx,
                             const std::vector<fs::path>& extra_inputs) {
  require_input(split_in, "split");
  ManifestEntry e = begin_entry("classify", ctx, {split_in});
  for (const fs::path& p : extra_inputs) e.inputs[name_of(p)] = sha256_file(p);
  const JsonlFile file = read_jsonl(split_in);
  const auto labeled = from_json_records(file.records, labeled_from_json, split_in.string());
  ClassifyOptions seeded = options;
  seeded.seed = ctx.seed;
  const auto rows = classify(backend, labeled, seeded);

  PredictionMeta meta{backend.name(), std::string(to_string(options.tmpl.kind)),
                      labeled.empty() ? std::string() : labeled.front().chunk.corpus_tag,
                      optional_field<std::string>(file.header, "split", split_in.stem().string())};
  Json header = provenance(e, ctx);
  header["meta"] = to_json(meta);
  header["mode"] = to_string(options.mode);
  header["verbalizer"] = options.verbalizer.name;
  write_jsonl(predictions_out, header, to_json_records(rows));
  finish(e, {predictions_out});
  return e;
}

ManifestEntry stage_eval(const fs::path& predictions_in, std::size_t replicates, std::size_t threads,
                         const fs::path& eval_out, const StageContext& ctx) {
  require_input(predictions_in, "classify");
  ManifestEntry e = begin_entry("eval", ctx, {predictions_in});
  const JsonlFile file = read_jsonl(predictions_in);
  PredictionSet preds;
  preds.rows = from_json_records(file.records, prediction_from_json, predictions_in.string());
  preds.meta = prediction_meta_from_json(file.header.value("meta", Json::object()));
  const EvalReport report = evaluate(preds, replicates, ctx.seed, threads);
  Json out = to_json(report);
  out["provenance"] = provenance(e, ctx);
  write_json(eval_out, out);
  finish(e, {eval_out});
  return e;
}

ManifestEntry stage_report(const ReportInputs& in, const ReportOutputs& out, const StageContext& ctx) {
  require_input(in.eval, "eval");
  require_input(in.predictions, "classify");
  require_input(in.labeled, "split");
  require_input(in.lexicon_terms, "lexicon data");
  ManifestEntry e = begin_entry("report", ctx, {in.eval, in.predictions, in.labeled, in.lexicon_terms});
  if (in.lexicon_ratings) {
    require_input(*in.lexicon_ratings, "lexicon data");
    e.inputs[name_of(*in.lexicon_ratings)] = sha256_file(*in.lexicon_ratings);
  }
  if (in.external_eval) {
    require_input(*in.external_eval, "eval");
    e.inputs[name_of(*in.external_eval)] = sha256_file(*in.external_eval);
  }

  const EvalReport eval = eval_report_from_json(read_json(in.eval));
  const auto rows = from_json_records(read_jsonl(in.predictions).records, prediction_from_json,
                                      in.predictions.string());
  const auto labeled = read_labeled(in.labeled);
  std::vector<Chunk> chunks;
  chunks.reserve(labeled.size());
  for (const LabeledChunk& l : labeled) chunks.push_back(l.chunk);

  const Lexicon lex = load_lexicon(in.lexicon_terms, in.lexicon_ratings);
  const auto assignments = score_lexicon(lex, LexiconConfig{});
  const ValenceShiftReport shift = valence_shift(assignments, labeled);
  const auto errors = keyword_error_report(rows, chunks);

  Json report = Json::object();
  report["provenance"] = provenance(e, ctx);
  report["metrics"] = to_json(eval.metrics);
  Json boot = Json::object();
  for (const auto& [name, b] : eval.bootstrap) boot[name] = to_json(b);
  report["bootstrap"] = boot;
  report["n"] = eval.n;
  report["meta"] = to_json(eval.meta);
  if (in.external_eval) {
    const EvalReport external = eval_report_from_json(read_json(*in.external_eval));
    Json drops = Json::array();
    for (const MetricDrop& d : cross_domain_report(eval, external)) drops.push_back(to_json(d));
    report["cross_domain"] = drops;
  }
  Json shift_json = Json::array();
  for (const ShiftEntry& s : shift.entries) shift_json.push_back(to_json(s));
  report["valence_shift"] = shift_json;
  Json error_json = Json::array();
  for (const TermErrorRow& r : errors) error_json.push_back(to_json(r));
  report["keyword_errors"] = error_json;
  write_json(out.report, report);
  write_text(out.plot_csv, valence_plot_csv(assignments, shift));
  finish(e, {out.report, out.plot_csv});
  return e;
}

// ---------------------------------------------------------------- config

Json PipelineConfig::to_json() const {
  return {{"out_dir", out_dir.string()},
          {"seed", seed},
          {"lexicon_terms", lexicon_terms.string()},
          {"lexicon_ratings", lexicon_ratings ? Json(lexicon_ratings->string()) : Json(nullptr)},
          {"synth",
           {{"n_notes", synth.n_notes},
            {"mix", synth.mix},
            {"corpus_tag", synth.corpus_tag},
            {"specialties", synth.specialties},
            {"min_filler", synth.min_filler},
            {"max_filler", synth.max_filler}}},
          {"window", window},
          {"sample",
           {{"kind", sample.kind == SampleStrategy::Kind::kPerKeyword ? "per_keyword" : "total"},
            {"n", sample.n},
            {"stratify_by_term", sample.stratify_by_term}}},
          {"split",
           {{"train", split.train},
            {"dev", split.dev},
            {"test", split.test},
            {"stratify_by", to_string(split.stratify_by)}}},
          {"template_kind", to_string(template_kind)},
          {"verbalizer", verbalizer},
          {"train",
           {{"learning_rate", train.learning_rate},
            {"batch_size", train.batch_size},
            {"max_epochs", train.max_epochs},
            {"patience", train.patience},
            {"dev_fraction", train.dev_fraction},
            {"dim", train.features.dim},
            {"unigrams", train.features.unigrams},
            {"keyword_identity", train.features.keyword_identity},
            {"priming_flag", train.features.priming_flag}}},
          {"bootstrap_replicates", bootstrap_replicates},
          {"threads", threads}};
}

std::string PipelineConfig::hash() const {
  Json j = to_json();
  for (const char* key : {"out_dir", "lexicon_terms", "lexicon_ratings", "threads"}) j.erase(key);
  return sha256_hex(j.dump());
}

PipelineConfig PipelineConfig::from_json(const Json& json, const PipelineConfig& defaults) {
  PipelineConfig c = defaults;
  if (!json.is_object()) throw ValidationError("pipeline config must be a JSON object");
  c.out_dir = optional_field<std::string>(json, "out_dir", c.out_dir.string());
  c.seed = optional_field<std::uint64_t>(json, "seed", c.seed);
  c.lexicon_terms = optional_field<std::string>(json, "lexicon_terms", c.lexicon_terms.string());
  if (const auto it = json.find("lexicon_ratings"); it != json.end()) {
    c.lexicon_ratings = it->is_null() ? std::nullopt : std::optional<fs::path>(it->get<std::string>());
  }
  if (const auto it = json.find("synth"); it != json.end()) {
    c.synth.n_notes = optional_field<std::size_t>(*it, "n_notes", c.synth.n_notes);
    c.synth.mix = optional_field<std::array<double, kNumLabels>>(*it, "mix", c.synth.mix);
    c.synth.corpus_tag = optional_field<std::string>(*it, "corpus_tag", c.synth.corpus_tag);
    c.synth.specialties = optional_field<std::vector<std::string>>(*it, "specialties", c.synth.specialties);
    c.synth.min_filler = optional_field<std::size_t>(*it, "min_filler", c.synth.min_filler);
    c.synth.max_filler = optional_field<std::size_t>(*it, "max_filler", c.synth.max_filler);
  }
  c.window = optional_field<std::size_t>(json, "window", c.window);
  if (const auto it = json.find("sample"); it != json.end()) {
    const std::string kind = optional_field<std::string>(*it, "kind", "total");
    const std::size_t n = optional_field<std::size_t>(*it, "n", c.sample.n);
    if (kind == "per_keyword") {
      c.sample = SampleStrategy::per_keyword(n);
    } else if (kind == "total") {
      c.sample = SampleStrategy::total(n, optional_field<bool>(*it, "stratify_by_term", false));
    } else {
      throw ValidationError("unknown sample kind '" + kind + "'");
    }
  }
  if (const auto it = json.find("split"); it != json.end()) {
    c.split.train = optional_field<double>(*it, "train", c.split.train);
    c.split.dev = optional_field<double>(*it, "dev", c.split.dev);
    c.split.test = optional_field<double>(*it, "test", c.split.test);
    if (it->contains("stratify_by")) c.split.stratify_by = parse_stratify(it->at("stratify_by").get<std::string>());
  }
  if (json.contains("template_kind")) c.template_kind = parse_template_kind(json.at("template_kind").get<std::string>());
  c.verbalizer = optional_field<std::string>(json, "verbalizer", c.verbalizer);
  if (const auto it = json.find("train"); it != json.end()) {
    c.train.learning_rate = optional_field<double>(*it, "learning_rate", c.train.learning_rate);
    c.train.batch_size = optional_field<std::size_t>(*it, "batch_size", c.train.batch_size);
    c.train.max_epochs = optional_field<std::size_t>(*it, "max_epochs", c.train.max_epochs);
    c.train.patience = optional_field<std::size_t>(*it, "patience", c.train.patience);
    c.train.dev_fraction = optional_field<double>(*it, "dev_fraction", c.train.dev_fraction);
    c.train.features.dim = optional_field<std::size_t>(*it, "dim", c.train.features.dim);
    c.train.features.unigrams = optional_field<bool>(*it, "unigrams", c.train.features.unigrams);
    c.train.features.keyword_identity =
        optional_field<bool>(*it, "keyword_identity", c.train.features.keyword_identity);
    c.train.features.priming_flag = optional_field<bool>(*it, "priming_flag", c.train.features.priming_flag);
  }
  c.bootstrap_replicates = optional_field<std::size_t>(json, "bootstrap_replicates", c.bootstrap_replicates);
  c.threads = optional_field<std::size_t>(json, "threads", c.threads);

  c.synth.validate();
  c.split.validate();
  c.train.validate();
  builtin_presets().verbalizer(c.verbalizer);
  return c;
}

// ---------------------------------------------------------------- runner

void record_manifest(const PipelineConfig& config, const ManifestEntry& entry) {
  const RunLayout layout{config.out_dir};
  Manifest m{config.hash(), config.seed, {}};
  if (fs::exists(layout.manifest())) {
    try {
      const Manifest old = manifest_from_json(read_json(layout.manifest()));
      if (old.config_hash == m.config_hash && old.seed == m.seed) m.stages = old.stages;
    } catch (const Error&) {
      // Unreadable manifest is replaced.
    }
  }
  std::erase_if(m.stages, [&](const ManifestEntry& e) { return e.stage == entry.stage; });
  m.stages.push_back(entry);
  auto rank = [](const std::string& s) {
    const auto it = std::find(kPipelineStages.begin(), kPipelineStages.end(), s);
    return static_cast<std::size_t>(it - kPipelineStages.begin());
  };
  std::stable_sort(m.stages.begin(), m.stages.end(),
                   [&](const ManifestEntry& a, const ManifestEntry& b) { return rank(a.stage) < rank(b.stage); });
  write_json(layout.manifest(), to_json(m));
}

ManifestEntry run_stage(const PipelineConfig& config, std::string_view stage) {
  const RunLayout L{config.out_dir};
  fs::create_directories(L.dir);
  const StageContext ctx{stage_seed(config.seed, stage), config.hash()};
  PromptTemplate tmpl;
  tmpl.kind = config.template_kind;

  ManifestEntry entry;
  if (stage == "synth") {
    entry = stage_synth(config.synth, config.lexicon_terms, L.notes(), L.gold(), ctx);
  } else if (stage == "extract") {
    entry = stage_extract(L.notes(), config.lexicon_terms, config.window, L.chunks(), ctx);
  } else if (stage == "sample") {
    entry = stage_sample(L.chunks(), config.sample, L.sampled(), ctx);
  } else if (stage == "split") {
    entry = stage_split(L.sampled(), L.gold(), config.split, {L.train(), L.dev(), L.test()}, ctx);
  } else if (stage == "train") {
    entry = stage_train(L.train(), L.dev(), tmpl, config.train, L.model(), ctx);
  } else if (stage == "classify") {
    require_input(L.model(), "train");
    const Verbalizer& verbalizer = builtin_presets().verbalizer(config.verbalizer);
    BaselineBackend backend(verbalizer, load_model(L.model()));
    ClassifyOptions options;
    options.tmpl = tmpl;
    options.verbalizer = verbalizer;
    entry = stage_classify(L.test(), backend, options, L.predictions(), ctx, {L.model()});
  } else if (stage == "eval") {
    entry = stage_eval(L.predictions(), config.bootstrap_replicates, config.threads, L.eval(), ctx);
  } else if (stage == "report") {
    entry = stage_report({L.eval(), L.predictions(), L.test(), config.lexicon_terms, config.lexicon_ratings, {}},
                         {L.report(), L.plot_csv()}, ctx);
  } else {
    throw ValidationError("unknown pipeline stage '" + std::string(stage) + "'");
  }
  record_manifest(config, entry);
  return entry;
}

Manifest run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages) {
  for (const std::string& s : stages) {
    if (std::find(kPipelineStages.begin(), kPipelineStages.end(), s) == kPipelineStages.end()) {
      throw ValidationError("unknown pipeline stage '" + s + "'");
    }
  }
  Manifest m{config.hash(), config.seed, {}};
  for (std::string_view s : kPipelineStages) {
    if (!stages.empty() && std::find(stages.begin(), stages.end(), s) == stages.end()) continue;
    m.stages.push_back(run_stage(config, s));
  }
  return m;
}

}  // namespace valence
