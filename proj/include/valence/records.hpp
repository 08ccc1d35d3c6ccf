#pragma once

#include <vector>

#include "valence/dataset.hpp"
#include "valence/eval.hpp"
#include "valence/extraction.hpp"
#include "valence/lexicon.hpp"
#include "valence/util/jsonl.hpp"

// JSON record forms of the domain types. Field names here are the on-disk
// contract for every artifact file.

namespace valence {

Json to_json(const SourceNote& note);
SourceNote note_from_json(const Json& json);

Json to_json(const Chunk& chunk);
Chunk chunk_from_json(const Json& json);

Json to_json(const AnnotationRecord& record);
AnnotationRecord annotation_from_json(const Json& json);

/// Chunk fields flattened, plus "gold" and "provenance".
Json to_json(const LabeledChunk& labeled);
LabeledChunk labeled_from_json(const Json& json);

Json to_json(const PredictionRow& row);
PredictionRow prediction_from_json(const Json& json);

Json to_json(const PredictionMeta& meta);
PredictionMeta prediction_meta_from_json(const Json& json);

Json to_json(const ValenceAssignment& assignment);
ValenceAssignment assignment_from_json(const Json& json);

Json to_json(const MacroMetrics& metrics);
Json to_json(const ConfusionMatrix& matrix);
Json to_json(const BootstrapResult& result);
Json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const Json& json);

Json to_json(const MetricDrop& drop);
Json to_json(const ShiftEntry& entry);
Json to_json(const TermErrorRow& row);

/// Maps each element through to_json / a from_json function. Parse errors are
/// rethrown with the record index.
template <typename T>
std::vector<Json> to_json_records(const std::vector<T>& items) {
  std::vector<Json> out;
  out.reserve(items.size());
  for (const T& item : items) out.push_back(to_json(item));
  return out;
}

template <typename F>
auto from_json_records(const std::vector<Json>& records, F&& parse, const std::string& source)
    -> std::vector<decltype(parse(records.front()))> {
  std::vector<decltype(parse(records.front()))> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(parse(records[i]));
    } catch (const ValidationError& e) {
      throw ValidationError(source + ": record " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace valence
