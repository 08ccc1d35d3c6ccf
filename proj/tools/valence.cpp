// Command-line entry point. Every subcommand reads and writes flat files in
// the run directory (--out-dir) unless explicit paths are given.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "valence/agreement.hpp"
#include "valence/annosvc.hpp"
#include "valence/annosvc_http.hpp"
#include "valence/pipeline.hpp"
#include "valence/promptopt.hpp"
#include "valence/records.hpp"

using namespace valence;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

PipelineConfig base_config(const Globals& g) {
  PipelineConfig c;
  if (!g.config_path.empty()) {
    if (!fs::exists(g.config_path)) throw ValidationError("config file not found: " + g.config_path);
    c = PipelineConfig::from_json(read_json(g.config_path));
  }
  if (g.seed) c.seed = *g.seed;
  if (g.out_dir) c.out_dir = *g.out_dir;
  return c;
}

StageContext context(const PipelineConfig& c, std::string_view stage) {
  return {stage_seed(c.seed, stage), c.hash()};
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

void finish(const PipelineConfig& c, const ManifestEntry& e) {
  record_manifest(c, e);
  std::cout << to_json(e).dump(2) << '\n';
}

AnnotationServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

// Mutable option state shared by the subcommand callbacks.
struct Options {
  // paths
  std::string terms, ratings, notes, gold, chunks, labels, train, dev, test, split_in, model, preds,
      eval, external_eval, labeled, out, plot, annotations, tokens, log;
  // lexicon
  double threshold = 2.5;
  bool require_full_overlap = false;
  // synth
  std::optional<std::size_t> n_notes;
  // extract / sample
  std::optional<std::size_t> window, per_keyword, total;
  bool stratify_by_term = false;
  // split
  std::optional<double> f_train, f_dev, f_test;
  std::string stratify_by;
  // prompting
  std::string template_kind, verbalizer, instruction, instruction_text, presets, backend = "baseline",
      mode = "score_mask";
  // training
  std::optional<double> lr;
  std::optional<std::size_t> batch, epochs, patience;
  // optimize
  std::string preset = "medium";
  std::optional<std::size_t> trials;
  // eval
  std::optional<std::size_t> replicates, threads;
  std::string gold_source = "from-chunks";
  // agreement
  std::string categories = "stigmatizing,privileging,neutral", scheme = "identity";
  // serve
  std::string host = "127.0.0.1", task_id = "task", annotators;
  int port = 8080;
  std::size_t overlap = 0;
  bool stratify_overlap = true;
  // run
  std::vector<std::string> stages;
};

PromptPresets presets(const Options& o) {
  return o.presets.empty() ? builtin_presets() : load_presets(o.presets);
}

PromptTemplate make_template(const Options& o, const PipelineConfig& c, const PromptPresets& p) {
  PromptTemplate t;
  t.kind = c.template_kind;
  if (!o.instruction_text.empty()) {
    t.instruction_text = o.instruction_text;
  } else if (!o.instruction.empty()) {
    t.instruction_text = p.instruction(o.instruction);
  } else if (t.kind == TemplateKind::kInstruction || t.kind == TemplateKind::kInstructionPrimed) {
    t.instruction_text = p.instruction("human_anchored");
  }
  t.validate();
  return t;
}

void apply_common(const Options& o, PipelineConfig& c) {
  if (o.window) c.window = *o.window;
  if (o.per_keyword && o.total) throw ValidationError("--per-keyword and --total are exclusive");
  if (o.per_keyword) c.sample = SampleStrategy::per_keyword(*o.per_keyword);
  if (o.total) c.sample = SampleStrategy::total(*o.total, o.stratify_by_term);
  if (o.f_train) c.split.train = *o.f_train;
  if (o.f_dev) c.split.dev = *o.f_dev;
  if (o.f_test) c.split.test = *o.f_test;
  if (!o.stratify_by.empty()) c.split.stratify_by = parse_stratify(o.stratify_by);
  if (!o.template_kind.empty()) c.template_kind = parse_template_kind(o.template_kind);
  if (!o.verbalizer.empty()) c.verbalizer = o.verbalizer;
  if (o.lr) c.train.learning_rate = *o.lr;
  if (o.batch) c.train.batch_size = *o.batch;
  if (o.epochs) c.train.max_epochs = *o.epochs;
  if (o.patience) c.train.patience = *o.patience;
  if (o.replicates) c.bootstrap_replicates = *o.replicates;
  if (o.threads) c.threads = *o.threads;
  if (o.n_notes) c.synth.n_notes = *o.n_notes;
  if (!o.terms.empty()) c.lexicon_terms = o.terms;
  if (!o.ratings.empty()) c.lexicon_ratings = fs::path(o.ratings);
  c.split.validate();
  c.train.validate();
}

std::vector<LabeledChunk> read_labeled(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw DependencyError("missing input " + path.string() + "; run the '" + std::string(producer) +
                          "' stage first");
  }
  return from_json_records(read_jsonl(path).records, labeled_from_json, path.string());
}

int run_serve(const Options& o, const PipelineConfig& c) {
  const fs::path chunks_path = or_default(o.chunks, RunLayout{c.out_dir}.sampled());
  if (!fs::exists(chunks_path)) throw DependencyError("missing chunks " + chunks_path.string() + "; run 'sample' first");
  TaskConfig task;
  task.task_id = o.task_id;
  task.seed = stage_seed(c.seed, "serve");
  task.pool = from_json_records(read_jsonl(chunks_path).records, chunk_from_json, chunks_path.string());
  for (std::size_t start = 0; start <= o.annotators.size();) {
    const auto end = std::min(o.annotators.find(',', start), o.annotators.size());
    if (end > start) task.roster.push_back(o.annotators.substr(start, end - start));
    start = end + 1;
  }
  task.overlap = build_overlap(task.pool, o.overlap, o.stratify_overlap, task.seed);
  if (!o.tokens.empty()) task.tokens = read_json(o.tokens).get<std::map<std::string, std::string>>();
  task.validate();

  fs::create_directories(c.out_dir);
  const fs::path log = or_default(o.log, c.out_dir / (task.task_id + ".events.jsonl"));
  auto service = std::make_shared<AnnotationService>(std::move(task), log);
  AnnotationServer server;
  server.add_task(service);
  const int port = server.bind(o.host, o.port);
  std::cout << "{\"host\":\"" << o.host << "\",\"port\":" << port << ",\"task_id\":\"" << o.task_id
            << "\",\"log\":" << Json(log.string()).dump() << "}" << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emotional-valence toolkit for clinical note language"};
  app.require_subcommand(1);
  Globals g;
  Options o;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_option("--seed", g.seed, "Global seed; stage seeds are derived from it");
  app.add_option("--out-dir", g.out_dir, "Run directory for artifacts");

  auto* lexicon = app.add_subcommand("lexicon", "Score the rated lexicon and write valence assignments");
  lexicon->add_option("--terms", o.terms, "Terms table (TSV)");
  lexicon->add_option("--ratings", o.ratings, "Ratings table (TSV)");
  lexicon->add_option("--threshold", o.threshold, "Inclusion threshold on the mean rating");
  lexicon->add_flag("--require-full-overlap", o.require_full_overlap, "Warn on missing ratings");
  lexicon->add_option("--out", o.out, "Output JSONL");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled note corpus");
  synth->add_option("--lexicon", o.terms, "Terms table (TSV)");
  synth->add_option("--n", o.n_notes, "Number of notes");
  synth->add_option("--notes", o.notes, "Output notes JSONL");
  synth->add_option("--gold", o.gold, "Output gold JSONL");

  auto* extract = app.add_subcommand("extract", "Extract keyword-anchored chunks from notes");
  extract->add_option("--lexicon", o.terms, "Terms table (TSV)");
  extract->add_option("--notes", o.notes, "Notes JSONL");
  extract->add_option("--window", o.window, "Scalars kept on each side of the match");
  extract->add_option("--out", o.out, "Output chunks JSONL");

  auto* sample = app.add_subcommand("sample", "Sample chunks for annotation");
  sample->add_option("--chunks", o.chunks, "Chunks JSONL");
  sample->add_option("--per-keyword", o.per_keyword, "Chunks per term");
  sample->add_option("--total", o.total, "Total chunks");
  sample->add_flag("--stratify-by-term", o.stratify_by_term, "Balance --total across terms");
  sample->add_option("--out", o.out, "Output JSONL");

  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  serve->add_option("--chunks", o.chunks, "Chunk pool JSONL");
  serve->add_option("--annotators", o.annotators, "Comma-separated roster")->required();
  serve->add_option("--overlap", o.overlap, "Chunks labeled by every annotator");
  serve->add_option("--stratify-overlap", o.stratify_overlap, "Balance the overlap across terms");
  serve->add_option("--tokens", o.tokens, "JSON object of annotator tokens");
  serve->add_option("--log", o.log, "Event log path");
  serve->add_option("--task-id", o.task_id, "Task id");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--port", o.port, "Port (0 picks a free one)");

  auto* split = app.add_subcommand("split", "Join labels and split into train/dev/test");
  split->add_option("--chunks", o.chunks, "Chunks JSONL");
  split->add_option("--labels", o.labels, "Gold JSONL or labeled-chunk export");
  split->add_option("--train-frac", o.f_train, "Train fraction");
  split->add_option("--dev-frac", o.f_dev, "Dev fraction");
  split->add_option("--test-frac", o.f_test, "Test fraction");
  split->add_option("--stratify-by", o.stratify_by, "label, term or none");

  auto* train = app.add_subcommand("train", "Fit the bag-of-words baseline");
  train->add_option("--train", o.train, "Training split");
  train->add_option("--dev", o.dev, "Dev split for early stopping");
  train->add_option("--template", o.template_kind, "Template kind");
  train->add_option("--lr", o.lr, "Learning rate");
  train->add_option("--batch-size", o.batch, "Mini-batch size");
  train->add_option("--epochs", o.epochs, "Maximum epochs");
  train->add_option("--patience", o.patience, "Early-stopping patience");
  train->add_option("--out", o.out, "Output model JSON");

  auto* cls = app.add_subcommand("classify", "Classify a split through a backend");
  cls->add_option("--split", o.split_in, "Labeled split JSONL");
  cls->add_option("--backend", o.backend, "baseline, mock[:rules.json] or remote:<url>");
  cls->add_option("--model", o.model, "Baseline model JSON");
  cls->add_option("--template", o.template_kind, "Template kind");
  cls->add_option("--verbalizer", o.verbalizer, "Verbalizer preset");
  cls->add_option("--instruction", o.instruction, "Instruction preset");
  cls->add_option("--instruction-text", o.instruction_text, "Literal instruction");
  cls->add_option("--presets", o.presets, "Presets JSON");
  cls->add_option("--mode", o.mode, "score_mask or generate");
  cls->add_option("--out", o.out, "Output predictions JSONL");

  auto* opt = app.add_subcommand("optimize", "Search instructions and demonstrations");
  opt->add_option("--train", o.train, "Training split");
  opt->add_option("--dev", o.dev, "Dev split");
  opt->add_option("--preset", o.preset, "light, medium or heavy");
  opt->add_option("--trials", o.trials, "Override the preset trial count");
  opt->add_option("--backend", o.backend, "baseline, mock[:rules.json] or remote:<url>");
  opt->add_option("--model", o.model, "Baseline model JSON");
  opt->add_option("--template", o.template_kind, "instruction or instruction_primed");
  opt->add_option("--verbalizer", o.verbalizer, "Verbalizer preset");
  opt->add_option("--presets", o.presets, "Presets JSON");
  opt->add_option("--mode", o.mode, "score_mask or generate");
  opt->add_option("--out", o.out, "Output report JSON");

  auto* ev = app.add_subcommand("eval", "Metrics with bootstrap confidence intervals");
  ev->add_option("--preds", o.preds, "Predictions JSONL");
  ev->add_option("--gold", o.gold_source, "Gold source (from-chunks: gold stored with predictions)");
  ev->add_option("--bootstrap", o.replicates, "Bootstrap replicates");
  ev->add_option("--threads", o.threads, "Worker threads (0 = hardware)");
  ev->add_option("--out", o.out, "Output eval JSON");

  auto* rep = app.add_subcommand("report", "Valence shift, keyword errors and cross-domain drops");
  rep->add_option("--eval", o.eval, "Eval JSON");
  rep->add_option("--preds", o.preds, "Predictions JSONL");
  rep->add_option("--labeled", o.labeled, "Labeled split the predictions refer to");
  rep->add_option("--external-eval", o.external_eval, "Eval JSON of an external corpus");
  rep->add_option("--lexicon", o.terms, "Terms table (TSV)");
  rep->add_option("--ratings", o.ratings, "Ratings table (TSV)");
  rep->add_option("--out", o.out, "Output report JSON");
  rep->add_option("--plot", o.plot, "Output plot CSV");

  auto* agr = app.add_subcommand("agreement", "Inter-annotator agreement over annotation records");
  agr->add_option("--annotations", o.annotations, "Annotation records JSONL")->required();
  agr->add_option("--categories", o.categories, "Category order, comma-separated");
  agr->add_option("--scheme", o.scheme, "identity, linear or quadratic");

  auto* run = app.add_subcommand("run", "Run pipeline stages in canonical order");
  run->add_option("stages", o.stages, "Stages to run (default: all)");
  run->add_option("--n", o.n_notes, "Synthetic notes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    PipelineConfig c = base_config(g);
    apply_common(o, c);
    const RunLayout L{c.out_dir};
    if (!*agr) fs::create_directories(c.out_dir);  // agreement only prints

    if (*lexicon) {
      if (!c.lexicon_ratings) throw ValidationError("lexicon scoring needs --ratings");
      LexiconConfig lc{o.threshold, o.require_full_overlap};
      lc.validate();
      finish(c, stage_lexicon(c.lexicon_terms, *c.lexicon_ratings, lc, or_default(o.out, c.out_dir / "lexicon.jsonl"),
                              context(c, "lexicon")));
    } else if (*synth) {
      finish(c, stage_synth(c.synth, c.lexicon_terms, or_default(o.notes, L.notes()), or_default(o.gold, L.gold()),
                            context(c, "synth")));
    } else if (*extract) {
      finish(c, stage_extract(or_default(o.notes, L.notes()), c.lexicon_terms, c.window,
                              or_default(o.out, L.chunks()), context(c, "extract")));
    } else if (*sample) {
      finish(c, stage_sample(or_default(o.chunks, L.chunks()), c.sample, or_default(o.out, L.sampled()),
                             context(c, "sample")));
    } else if (*serve) {
      return run_serve(o, c);
    } else if (*split) {
      finish(c, stage_split(or_default(o.chunks, L.sampled()), or_default(o.labels, L.gold()), c.split,
                            {L.train(), L.dev(), L.test()}, context(c, "split")));
    } else if (*train) {
      const PromptPresets p = presets(o);
      const fs::path dev = or_default(o.dev, L.dev());
      finish(c, stage_train(or_default(o.train, L.train()), fs::exists(dev) ? std::optional(dev) : std::nullopt,
                            make_template(o, c, p), c.train, or_default(o.out, L.model()), context(c, "train")));
    } else if (*cls) {
      const PromptPresets p = presets(o);
      ClassifyOptions options;
      options.tmpl = make_template(o, c, p);
      options.verbalizer = p.verbalizer(c.verbalizer);
      options.mode = parse_classify_mode(o.mode);
      const fs::path model = or_default(o.model, L.model());
      if (o.backend == "baseline" && !fs::exists(model)) {
        throw DependencyError("missing model " + model.string() + "; run the 'train' stage first");
      }
      auto backend = make_backend(o.backend, options.verbalizer, model);
      std::vector<fs::path> extra;
      if (o.backend == "baseline") extra.push_back(model);
      finish(c, stage_classify(or_default(o.split_in, L.test()), *backend, options,
                               or_default(o.out, L.predictions()), context(c, "classify"), extra));
    } else if (*opt) {
      const PromptPresets p = presets(o);
      const auto train_set = read_labeled(or_default(o.train, L.train()), "split");
      const auto dev_set = read_labeled(or_default(o.dev, L.dev()), "split");
      OptOptions options;
      options.kind = o.template_kind.empty() ? TemplateKind::kInstructionPrimed : c.template_kind;
      options.classify.verbalizer = p.verbalizer(c.verbalizer);
      options.classify.mode = parse_classify_mode(o.mode);
      for (const char* name : {"human_primed", "human_anchored"}) options.seed_instructions.push_back(p.instruction(name));
      const StageContext ctx = context(c, "optimize");
      OptBudget budget = OptBudget::from_preset(o.preset, ctx.seed);
      if (o.trials) budget.trials = *o.trials;
      auto backend = make_backend(o.backend, options.classify.verbalizer, or_default(o.model, L.model()));
      const OptResult result = optimize(train_set, dev_set, budget, *backend, options);
      Json out = to_json(result);
      out["provenance"] = {{"stage", "optimize"}, {"seed", ctx.seed}, {"config_hash", ctx.config_hash}};
      const fs::path path = or_default(o.out, c.out_dir / "optimize.json");
      write_json(path, out);
      std::cout << Json({{"out", path.string()},
                         {"dev_score", result.dev_score},
                         {"baseline_score", result.baseline_score},
                         {"no_improvement", result.no_improvement},
                         {"instruction", result.best.instruction}})
                       .dump(2)
                << '\n';
    } else if (*ev) {
      if (o.gold_source != "from-chunks") throw ValidationError("--gold supports only 'from-chunks'");
      finish(c, stage_eval(or_default(o.preds, L.predictions()), c.bootstrap_replicates, c.threads,
                           or_default(o.out, L.eval()), context(c, "eval")));
    } else if (*rep) {
      ReportInputs in{or_default(o.eval, L.eval()), or_default(o.preds, L.predictions()),
                      or_default(o.labeled, L.test()), c.lexicon_terms, c.lexicon_ratings, std::nullopt};
      if (!o.external_eval.empty()) in.external_eval = fs::path(o.external_eval);
      finish(c, stage_report(in, {or_default(o.out, L.report()), or_default(o.plot, L.plot_csv())},
                             context(c, "report")));
    } else if (*agr) {
      if (!fs::exists(o.annotations)) throw ValidationError("annotations file not found: " + o.annotations);
      const auto records =
          from_json_records(read_jsonl(o.annotations).records, annotation_from_json, o.annotations);
      std::vector<ValenceLabel> order;
      for (std::size_t start = 0; start <= o.categories.size();) {
        const auto end = std::min(o.categories.find(',', start), o.categories.size());
        if (end > start) order.push_back(require_label(o.categories.substr(start, end - start)));
        start = end + 1;
      }
      const AgreementReport r = agreement_from_annotations(records, order, parse_weight_scheme(o.scheme));
      std::cout << Json({{"percent_agreement", r.percent_agreement},
                         {"gwet_ac", r.gwet_ac},
                         {"scheme", to_string(r.scheme)},
                         {"n_items", r.n_items},
                         {"n_categories", r.n_categories},
                         {"benchmark", r.benchmark}})
                       .dump(2)
                << '\n';
    } else if (*run) {
      const Manifest m = run_pipeline(c, o.stages);
      std::cout << to_json(m).dump(2) << '\n';
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kValidation);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kDependency);
  }
}
