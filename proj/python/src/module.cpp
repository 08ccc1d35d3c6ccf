#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "valence/agreement.hpp"
#include "valence/backends.hpp"
#include "valence/eval.hpp"
#include "valence/pipeline.hpp"
#include "valence/records.hpp"

namespace py = pybind11;
using namespace valence;

namespace {

py::object to_py(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_py(const py::handle& obj) {
  return Json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

RatingTable table_of(const std::vector<std::vector<std::size_t>>& counts) {
  RatingTable t;
  t.counts = counts;
  for (std::size_t i = 0; i < counts.size(); ++i) t.items.push_back("i" + std::to_string(i));
  const std::size_t q = counts.empty() ? 0 : counts.front().size();
  for (std::size_t k = 0; k < q; ++k) t.categories.push_back("c" + std::to_string(k));
  return t;
}

std::vector<PredictionRow> rows_of(const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
  if (gold.size() != predicted.size()) throw ValidationError("gold and predicted differ in length");
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    rows.push_back({std::to_string(i), require_label(gold[i]), parse_predicted(predicted[i])});
  }
  return rows;
}

template <typename T, typename Parse>
std::vector<T> records_of(const py::list& items, Parse parse) {
  std::vector<T> out;
  for (const py::handle& item : items) out.push_back(parse(from_py(item)));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Emotional-valence toolkit core";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<DependencyError>(m, "DependencyError", base.ptr());
  py::register_exception<BackendError>(m, "BackendError", base.ptr());

  m.def(
      "gwet_ac",
      [](const std::vector<std::vector<std::size_t>>& counts, const std::string& scheme) {
        return gwet_ac(table_of(counts), parse_weight_scheme(scheme));
      },
      py::arg("counts"), py::arg("scheme") = "identity",
      "Gwet AC1 (identity) or AC2 (linear, quadratic) over an items x categories count table.");
  m.def(
      "percent_agreement",
      [](const std::vector<std::vector<std::size_t>>& counts) { return percent_agreement(table_of(counts)); },
      py::arg("counts"));

  m.def(
      "verbalize",
      [](const std::map<std::string, double>& logits, const std::string& verbalizer) {
        WordLogits w(logits.begin(), logits.end());
        const ClassScores s = verbalize(w, builtin_presets().verbalizer(verbalizer));
        std::map<std::string, double> out;
        for (ValenceLabel l : kAllLabels) out[std::string(to_string(l))] = s[l];
        return out;
      },
      py::arg("logits"), py::arg("verbalizer") = "single_word");
  m.def(
      "render",
      [](const std::string& text, std::optional<std::string> keyword, const std::string& kind,
         const std::string& instruction) {
        PromptTemplate t;
        t.kind = parse_template_kind(kind);
        t.instruction_text = instruction;
        t.validate();
        return render(text, keyword ? std::optional<std::string_view>(*keyword) : std::nullopt, t);
      },
      py::arg("text"), py::arg("keyword") = py::none(), py::arg("kind") = "cloze", py::arg("instruction") = "");
  m.def(
      "postprocess_generation",
      [](const std::string& raw) { return std::string(to_string(postprocess_generation(raw))); }, py::arg("raw"));

  m.def(
      "macro_metrics",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
        return to_py(to_json(macro_metrics(rows_of(gold, predicted))));
      },
      py::arg("gold"), py::arg("predicted"));
  m.def(
      "evaluate",
      [](const std::vector<std::string>& gold, const std::vector<std::string>& predicted, std::size_t replicates,
         std::uint64_t seed, std::size_t threads) {
        PredictionSet set{rows_of(gold, predicted), {}};
        EvalReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(set, replicates, seed, threads);
        }
        return to_py(to_json(r));
      },
      py::arg("gold"), py::arg("predicted"), py::arg("replicates") = 1000, py::arg("seed") = 42,
      py::arg("threads") = 0);
  m.def("relative_drop", &relative_drop, py::arg("in_domain"), py::arg("external"));

  m.def(
      "score_lexicon",
      [](const fs::path& terms, const fs::path& ratings, double threshold) {
        LexiconConfig c;
        c.inclusion_threshold = threshold;
        c.validate();
        const Lexicon lex = load_lexicon(terms, ratings);
        return to_py(to_json_records(score_lexicon(lex, c)));
      },
      py::arg("terms"), py::arg("ratings"), py::arg("threshold") = 2.5);
  m.def(
      "extract",
      [](const py::list& notes, const fs::path& terms, std::size_t window) {
        const auto parsed = records_of<SourceNote>(notes, note_from_json);
        const auto matchers = compile_matchers(load_lexicon(terms).terms);
        return to_py(to_json_records(extract_all(parsed, matchers, window)));
      },
      py::arg("notes"), py::arg("terms"), py::arg("window") = kDefaultWindow);
  m.def(
      "synth",
      [](const fs::path& terms, std::size_t n_notes, std::uint64_t seed) {
        SynthSpec spec;
        spec.n_notes = n_notes;
        const SynthCorpus c = synth_corpus(spec, load_lexicon(terms).terms, seed);
        py::dict out;
        out["notes"] = to_py(to_json_records(c.notes));
        out["gold"] = to_py(to_json_records(c.gold));
        return out;
      },
      py::arg("terms"), py::arg("n_notes") = 300, py::arg("seed") = 42);
  m.def(
      "split_sizes",
      [](std::size_t n, double train, double dev, double test) {
        SplitSpec s;
        s.train = train;
        s.dev = dev;
        s.test = test;
        s.validate();
        const SplitSizes z = split_sizes(n, s);
        return py::make_tuple(z.train, z.dev, z.test);
      },
      py::arg("n"), py::arg("train") = 0.6, py::arg("dev") = 0.2, py::arg("test") = 0.2);

  py::class_<BaselineModel>(m, "BaselineModel")
      .def("predict", [](const BaselineModel& model, const std::string& prompt) {
        return std::string(to_string(model.predict(prompt)));
      })
      .def("predict_proba",
           [](const BaselineModel& model, const std::string& prompt) {
             const ClassScores s = model.predict_proba(featurize(prompt, model.features));
             std::map<std::string, double> out;
             for (ValenceLabel l : kAllLabels) out[std::string(to_string(l))] = s[l];
             return out;
           })
      .def("to_json", [](const BaselineModel& model) { return to_py(model_to_json(model)); })
      .def_static("from_json", [](const py::object& obj) { return model_from_json(from_py(obj)); })
      .def("__eq__", [](const BaselineModel& a, const BaselineModel& b) { return a == b; });
  m.def(
      "train_baseline",
      [](const std::vector<std::string>& prompts, const std::vector<std::string>& labels, std::uint64_t seed,
         double learning_rate, std::size_t max_epochs, std::size_t dim, double dev_fraction,
         std::size_t patience) {
        if (prompts.size() != labels.size()) throw ValidationError("prompts and labels differ in length");
        std::vector<LabeledPrompt> train;
        for (std::size_t i = 0; i < prompts.size(); ++i) train.push_back({prompts[i], require_label(labels[i])});
        TrainConfig c;
        c.seed = seed;
        c.learning_rate = learning_rate;
        c.max_epochs = max_epochs;
        c.features.dim = dim;
        c.dev_fraction = dev_fraction;
        c.patience = patience;
        c.validate();
        py::gil_scoped_release release;
        return train_baseline(train, c);
      },
      py::arg("prompts"), py::arg("labels"), py::arg("seed") = 42, py::arg("learning_rate") = 0.3,
      py::arg("max_epochs") = 300, py::arg("dim") = kDefaultHashDim, py::arg("dev_fraction") = 0.2,
      py::arg("patience") = 50);

  m.def(
      "run_pipeline",
      [](const py::dict& config, const std::vector<std::string>& stages) {
        const PipelineConfig c = PipelineConfig::from_json(from_py(config));
        Manifest manifest;
        {
          py::gil_scoped_release release;
          manifest = run_pipeline(c, stages);
        }
        return to_py(to_json(manifest));
      },
      py::arg("config"), py::arg("stages") = std::vector<std::string>{});
  m.attr("PIPELINE_STAGES") = std::vector<std::string>(kPipelineStages.begin(), kPipelineStages.end());
}
