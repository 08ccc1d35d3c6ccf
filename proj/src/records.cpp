#include "valence/records.hpp"

namespace valence {

namespace {

using std::size_t;

Json mean_json(const std::optional<ExactMean>& mean) {
  if (!mean) return nullptr;
  return Json{{"sum", mean->sum}, {"count", mean->count}, {"value", mean->value()}};
}

std::optional<ExactMean> mean_from_json(const Json& json, const char* key) {
  const auto it = json.find(key);
  if (it == json.end() || it->is_null()) return std::nullopt;
  ExactMean m{require_field<std::int64_t>(*it, "sum"), require_field<std::int64_t>(*it, "count")};
  if (m.count <= 0) throw ValidationError(std::string("field '") + key + "' has count <= 0");
  return m;
}

MacroMetrics metrics_from_json(const Json& json) {
  MacroMetrics m;
  m.f1 = require_field<double>(json, "macro_f1");
  m.precision = require_field<double>(json, "macro_precision");
  m.recall = require_field<double>(json, "macro_recall");
  m.accuracy = require_field<double>(json, "accuracy");
  const Json per_class = json.value("per_class", Json::object());
  for (ValenceLabel label : kAllLabels) {
    const auto it = per_class.find(std::string(to_string(label)));
    if (it == per_class.end()) continue;
    ClassMetrics& c = m.per_class[index_of(label)];
    c.precision = require_field<double>(*it, "precision");
    c.recall = require_field<double>(*it, "recall");
    c.f1 = require_field<double>(*it, "f1");
    c.support = require_field<size_t>(*it, "support");
  }
  return m;
}

}  // namespace

Json to_json(const SourceNote& note) {
  return {{"note_id", note.note_id},
          {"corpus_tag", note.corpus_tag},
          {"specialty", note.specialty},
          {"text", note.text}};
}

SourceNote note_from_json(const Json& json) {
  return {require_field<std::string>(json, "note_id"),
          optional_field<std::string>(json, "corpus_tag", ""),
          optional_field<std::string>(json, "specialty", ""),
          require_field<std::string>(json, "text")};
}

Json to_json(const Chunk& c) {
  return {{"chunk_id", c.chunk_id},         {"note_id", c.note_id},
          {"term_id", c.term_id},           {"surface", c.surface},
          {"window_text", c.window_text},   {"anchor_start", c.anchor_start},
          {"anchor_end", c.anchor_end},     {"source_start", c.source_start},
          {"source_end", c.source_end},     {"corpus_tag", c.corpus_tag},
          {"specialty", c.specialty}};
}

Chunk chunk_from_json(const Json& json) {
  Chunk c;
  c.chunk_id = require_field<std::string>(json, "chunk_id");
  c.note_id = optional_field<std::string>(json, "note_id", "");
  c.term_id = require_field<std::string>(json, "term_id");
  c.surface = optional_field<std::string>(json, "surface", "");
  c.window_text = require_field<std::string>(json, "window_text");
  c.anchor_start = require_field<size_t>(json, "anchor_start");
  c.anchor_end = require_field<size_t>(json, "anchor_end");
  c.source_start = optional_field<size_t>(json, "source_start", 0);
  c.source_end = optional_field<size_t>(json, "source_end", 0);
  c.corpus_tag = optional_field<std::string>(json, "corpus_tag", "");
  c.specialty = optional_field<std::string>(json, "specialty", "");
  if (c.anchor_start >= c.anchor_end) {
    throw ValidationError("chunk '" + c.chunk_id + "' has an empty anchor span");
  }
  return c;
}

Json to_json(const AnnotationRecord& r) {
  return {{"chunk_id", r.chunk_id},
          {"annotator_id", r.annotator_id},
          {"label", to_string(r.label)},
          {"timestamp", r.timestamp}};
}

AnnotationRecord annotation_from_json(const Json& json) {
  return {require_field<std::string>(json, "chunk_id"),
          require_field<std::string>(json, "annotator_id"),
          require_label(require_field<std::string>(json, "label")),
          optional_field<std::string>(json, "timestamp", "")};
}

Json to_json(const LabeledChunk& l) {
  Json out = to_json(l.chunk);
  out["gold"] = to_string(l.gold);
  out["provenance"] = l.provenance;
  return out;
}

LabeledChunk labeled_from_json(const Json& json) {
  return {chunk_from_json(json), require_label(require_field<std::string>(json, "gold")),
          optional_field<std::string>(json, "provenance", "single")};
}

Json to_json(const PredictionRow& row) {
  return {{"chunk_id", row.chunk_id},
          {"gold", to_string(row.gold)},
          {"predicted", to_string(row.predicted)}};
}

PredictionRow prediction_from_json(const Json& json) {
  return {require_field<std::string>(json, "chunk_id"),
          require_label(require_field<std::string>(json, "gold")),
          parse_predicted(require_field<std::string>(json, "predicted"))};
}

Json to_json(const PredictionMeta& m) {
  return {{"backend", m.backend},
          {"template_kind", m.template_kind},
          {"corpus_tag", m.corpus_tag},
          {"split", m.split}};
}

PredictionMeta prediction_meta_from_json(const Json& json) {
  return {optional_field<std::string>(json, "backend", ""),
          optional_field<std::string>(json, "template_kind", ""),
          optional_field<std::string>(json, "corpus_tag", ""),
          optional_field<std::string>(json, "split", "")};
}

Json to_json(const ValenceAssignment& a) {
  Json assigned = Json::array();
  if (a.stigmatizing) assigned.push_back("stigmatizing");
  if (a.privileging) assigned.push_back("privileging");
  return {{"term_id", a.term_id},
          {"stigmatizing_mean", mean_json(a.stigmatizing_mean)},
          {"privileging_mean", mean_json(a.privileging_mean)},
          {"assigned", assigned},
          {"included", a.included}};
}

ValenceAssignment assignment_from_json(const Json& json) {
  ValenceAssignment a;
  a.term_id = require_field<std::string>(json, "term_id");
  a.stigmatizing_mean = mean_from_json(json, "stigmatizing_mean");
  a.privileging_mean = mean_from_json(json, "privileging_mean");
  for (const auto& v : require_field<std::vector<std::string>>(json, "assigned")) {
    (parse_valence(v) == Valence::kStigmatizing ? a.stigmatizing : a.privileging) = true;
  }
  a.included = a.stigmatizing || a.privileging;
  return a;
}

Json to_json(const MacroMetrics& m) {
  Json per_class = Json::object();
  for (ValenceLabel label : kAllLabels) {
    const ClassMetrics& c = m.per_class[index_of(label)];
    per_class[std::string(to_string(label))] = {
        {"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  }
  return {{"macro_f1", m.f1},
          {"macro_precision", m.precision},
          {"macro_recall", m.recall},
          {"accuracy", m.accuracy},
          {"per_class", per_class}};
}

Json to_json(const ConfusionMatrix& matrix) {
  Json columns = Json::array();
  for (ValenceLabel label : kAllLabels) columns.push_back(to_string(label));
  columns.push_back("unparseable");
  Json rows = Json::object();
  for (ValenceLabel gold : kAllLabels) rows[std::string(to_string(gold))] = matrix[index_of(gold)];
  return {{"columns", columns}, {"rows", rows}};
}

Json to_json(const BootstrapResult& b) {
  return {{"estimate", b.estimate}, {"mean", b.mean},   {"ci_low", b.ci_low},
          {"ci_high", b.ci_high},   {"replicates", b.replicates},
          {"seed", b.seed},         {"method", "percentile"}};
}

Json to_json(const EvalReport& r) {
  Json boot = Json::object();
  for (const auto& [name, b] : r.bootstrap) boot[name] = to_json(b);
  return {{"n", r.n},
          {"metrics", to_json(r.metrics)},
          {"confusion", to_json(r.matrix)},
          {"bootstrap", boot},
          {"meta", to_json(r.meta)}};
}

EvalReport eval_report_from_json(const Json& json) {
  EvalReport r;
  r.n = require_field<size_t>(json, "n");
  r.metrics = metrics_from_json(require_field<Json>(json, "metrics"));
  r.meta = prediction_meta_from_json(json.value("meta", Json::object()));
  if (const auto it = json.find("confusion"); it != json.end()) {
    const Json rows = require_field<Json>(*it, "rows");
    for (ValenceLabel gold : kAllLabels) {
      const auto row = rows.find(std::string(to_string(gold)));
      if (row == rows.end()) continue;
      const auto counts = row->get<std::vector<size_t>>();
      if (counts.size() != kNumLabels + 1) throw ValidationError("confusion row has wrong width");
      std::copy(counts.begin(), counts.end(), r.matrix[index_of(gold)].begin());
    }
  }
  const Json boot = json.value("bootstrap", Json::object());
  for (const auto& [name, b] : boot.items()) {
    r.bootstrap[name] = {require_field<double>(b, "estimate"), require_field<double>(b, "mean"),
                         require_field<double>(b, "ci_low"),   require_field<double>(b, "ci_high"),
                         require_field<size_t>(b, "replicates"),
                         require_field<std::uint64_t>(b, "seed")};
  }
  return r;
}

Json to_json(const MetricDrop& d) {
  return {{"metric", d.metric},
          {"in_domain", d.in_domain},
          {"external", d.external},
          {"relative_drop", d.relative_drop ? Json(*d.relative_drop) : Json(nullptr)},
          {"improvement", d.improvement}};
}

Json to_json(const ShiftEntry& e) {
  Json assigned = Json::array();
  if (e.assigned_stigmatizing) assigned.push_back("stigmatizing");
  if (e.assigned_privileging) assigned.push_back("privileging");
  Json observed = Json::array();
  for (ValenceLabel l : e.observed) observed.push_back(to_string(l));
  return {{"term_id", e.term_id},          {"corpus_tag", e.corpus_tag},
          {"assigned", assigned},          {"observed", observed},
          {"new_neutral", e.new_neutral},  {"polarity_flip", e.polarity_flip},
          {"new_polarity", e.new_polarity}};
}

Json to_json(const TermErrorRow& row) {
  auto breakdown = [](const std::map<std::string, ErrorBreakdown>& m) {
    Json out = Json::object();
    for (const auto& [key, b] : m) {
      out[key] = {{"n", b.n}, {"correct", b.correct}, {"accuracy", b.accuracy()}};
    }
    return out;
  };
  Json top = nullptr;
  if (row.top_confusion) {
    top = {{"gold", to_string(row.top_confusion->first)},
           {"predicted", to_string(row.top_confusion->second)},
           {"count", row.top_confusion_count}};
  }
  return {{"term_id", row.term_id},
          {"n", row.n},
          {"correct", row.correct},
          {"accuracy", row.accuracy},
          {"top_confusion", top},
          {"by_corpus", breakdown(row.by_corpus)},
          {"by_specialty", breakdown(row.by_specialty)},
          {"exclusive_corpus", row.exclusive_corpus ? Json(*row.exclusive_corpus) : Json(nullptr)}};
}

}  // namespace valence
