#include "valence/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "valence/error.hpp"
#include "valence/util/jsonl.hpp"
#include "valence/util/utf8.hpp"

namespace valence {

namespace {

constexpr std::array<std::pair<TemplateKind, std::string_view>, 6> kKindNames = {{
    {TemplateKind::kAnchored, "anchored"},
    {TemplateKind::kPrimed, "primed"},
    {TemplateKind::kCloze, "cloze"},
    {TemplateKind::kClozePrimed, "cloze_primed"},
    {TemplateKind::kInstruction, "instruction"},
    {TemplateKind::kInstructionPrimed, "instruction_primed"},
}};

std::string primed_body(std::string_view text, std::string_view word) {
  std::string out = "Word: ";
  out += word;
  out += " [...] ";
  out += text;
  out += " [...]";
  return out;
}

std::string with_instruction(std::string_view instruction, std::string_view body) {
  std::string out(instruction);
  const bool terminated = !out.empty() && (out.back() == '.' || out.back() == '?' ||
                                           out.back() == '!' || out.back() == ':');
  out += terminated ? " " : ". ";
  out += body;
  return out;
}

PromptPresets make_builtin() {
  PromptPresets p;
  Verbalizer single{"single_word", {{{"negative"}, {"positive"}, {"neutral"}}}};
  Verbalizer multi{"multi_word",
                   {{{"negative", "stigma", "bad"},
                     {"positive", "privilege", "good"},
                     {"neutral", "instruction", "clinical"}}}};
  p.verbalizers.emplace(single.name, single);
  p.verbalizers.emplace(multi.name, multi);

  p.instructions["human_anchored"] =
      "Classify whether the chunk extracted from a clinical note carries a privileging, "
      "stigmatizing, or neutral valence.";
  p.instructions["human_primed"] =
      "Classify whether the word indicated at the beginning of the chunk extracted from a "
      "clinical note carries a privileging, stigmatizing, or neutral valence in the context "
      "provided.";
  p.instructions["optimized_llama_obgyn"] =
      "Analyze the given clinical note chunk, focusing on the word indicated at the beginning, "
      "and classify its valence as privileging, stigmatizing, or neutral based on the context "
      "provided. Consider the emotional tone conveyed by the language used in the chunk, taking "
      "into account the medical terminology, patient description, and overall sentiment "
      "expressed. Assign a valence that accurately reflects the emotional connotation of the "
      "word within the clinical note, ensuring that your classification is informed by the "
      "nuances of medical communication and the specific details presented in the chunk.";
  p.instructions["optimized_llama_mimic"] =
      "Analyze the given chunk of text from a clinical note, focusing on the word indicated at "
      "the beginning. Determine whether this word conveys a privileging, stigmatizing, or "
      "neutral valence within the provided context, and classify it accordingly.";
  p.instructions["optimized_med42_obgyn"] =
      "For each identified keyword in a clinical note chunk (e.g., \"pleasant,\" \"adherence\"), "
      "determine its valence as privileging, stigmatizing, or neutral by considering both "
      "medical context and linguistic cues. Implement domain-specific sentiment analysis rules "
      "or train a machine learning model on annotated datasets to assign accurate valences. "
      "Ensure the instruction emphasizes capturing nuanced expressions typical in clinical "
      "documentation while prioritizing factual representations over emotional bias.";
  p.instructions["optimized_med42_mimic"] =
      "In a critical care setting, accurately classify sentiment valence (privileging, "
      "stigmatizing, or neutral) in clinical text chunks to inform timely interventions and "
      "patient summaries. Given phrases from psychiatric and internal medicine notes, such as "
      "\"difficulty inspiring\" for respiratory symptoms or \"appropriately dressed\" for mental "
      "status evaluation, the Language Model must assign correct valence labels considering "
      "domain-specific context.";
  return p;
}

}  // namespace

std::string_view to_string(TemplateKind kind) noexcept {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "anchored";
}

TemplateKind parse_template_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames) {
    if (name == text) return k;
  }
  throw ValidationError("unknown template kind '" + std::string(text) + "'");
}

bool is_primed(TemplateKind kind) noexcept {
  return kind == TemplateKind::kPrimed || kind == TemplateKind::kClozePrimed ||
         kind == TemplateKind::kInstructionPrimed;
}

bool is_cloze(TemplateKind kind) noexcept {
  return kind == TemplateKind::kCloze || kind == TemplateKind::kClozePrimed;
}

void PromptTemplate::validate() const {
  if (is_cloze(kind) && mask_token.empty()) {
    throw ValidationError("cloze template needs a mask token");
  }
  if ((kind == TemplateKind::kInstruction || kind == TemplateKind::kInstructionPrimed) &&
      instruction_text.empty()) {
    throw ValidationError("instruction template needs instruction text");
  }
}

std::string render(std::string_view text, std::optional<std::string_view> keyword,
                   const PromptTemplate& tmpl) {
  tmpl.validate();
  if (is_primed(tmpl.kind) && (!keyword || keyword->empty())) {
    throw ValidationError("template '" + std::string(to_string(tmpl.kind)) +
                          "' needs the chunk keyword");
  }
  switch (tmpl.kind) {
    case TemplateKind::kAnchored:
      return std::string(text);
    case TemplateKind::kPrimed:
      return primed_body(text, *keyword);
    case TemplateKind::kCloze:
      return std::string(text) + " This sentence is: " + tmpl.mask_token;
    case TemplateKind::kClozePrimed:
      return std::string(text) + " Keyword is: " + std::string(*keyword) +
             ". This sentence is: " + tmpl.mask_token;
    case TemplateKind::kInstruction:
      return with_instruction(tmpl.instruction_text, text);
    case TemplateKind::kInstructionPrimed:
      return with_instruction(tmpl.instruction_text, primed_body(text, *keyword));
  }
  return std::string(text);
}

void Verbalizer::validate() const {
  std::set<std::string> seen;
  for (ValenceLabel label : kAllLabels) {
    const auto& list = words[index_of(label)];
    if (list.empty()) {
      throw ValidationError("verbalizer '" + name + "' has no words for " +
                            std::string(to_string(label)));
    }
    for (const std::string& w : list) {
      if (!seen.insert(w).second) {
        throw ValidationError("verbalizer '" + name + "' maps word '" + w + "' to two classes");
      }
    }
  }
}

std::vector<std::string> Verbalizer::all_words() const {
  std::vector<std::string> out;
  for (const auto& list : words) out.insert(out.end(), list.begin(), list.end());
  return out;
}

ClassScores verbalize(const WordLogits& logits, const Verbalizer& verbalizer) {
  std::array<double, kNumLabels> means{};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    double sum = 0.0;
    for (const std::string& w : verbalizer.words[k]) {
      const auto it = logits.find(w);
      if (it == logits.end()) throw DomainError("no logit for verbalizer word '" + w + "'");
      if (!std::isfinite(it->second)) {
        throw DomainError("non-finite logit for verbalizer word '" + w + "'");
      }
      sum += it->second;
    }
    if (verbalizer.words[k].empty()) throw DomainError("verbalizer class without words");
    means[k] = sum / static_cast<double>(verbalizer.words[k].size());
  }
  const double top = *std::max_element(means.begin(), means.end());
  double z = 0.0;
  ClassScores out;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    out.p[k] = std::exp(means[k] - top);
    z += out.p[k];
  }
  for (double& p : out.p) p /= z;
  return out;
}

ValenceLabel argmax_label(const ClassScores& scores) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (scores.p[k] > scores.p[best]) best = k;
  }
  return static_cast<ValenceLabel>(best);
}

Predicted postprocess_generation(std::string_view raw) {
  const std::string text = utf8::to_lower(raw);
  std::size_t best_pos = std::string::npos;
  Predicted best;
  for (ValenceLabel label : kAllLabels) {
    const std::size_t pos = text.find(to_string(label));
    if (pos < best_pos) {
      best_pos = pos;
      best = label;
    }
  }
  return best;
}

const Verbalizer& PromptPresets::verbalizer(std::string_view name) const {
  const auto it = verbalizers.find(std::string(name));
  if (it == verbalizers.end()) {
    throw ValidationError("unknown verbalizer preset '" + std::string(name) + "'");
  }
  return it->second;
}

const std::string& PromptPresets::instruction(std::string_view name) const {
  const auto it = instructions.find(std::string(name));
  if (it == instructions.end()) {
    throw ValidationError("unknown instruction preset '" + std::string(name) + "'");
  }
  return it->second;
}

const PromptPresets& builtin_presets() {
  static const PromptPresets presets = make_builtin();
  return presets;
}

PromptPresets presets_from_json(const nlohmann::json& json) {
  PromptPresets p;
  const nlohmann::json instructions = json.value("instructions", nlohmann::json::object());
  for (const auto& [name, text] : instructions.items()) {
    p.instructions[name] = text.get<std::string>();
  }
  const nlohmann::json verbalizers = json.value("verbalizers", nlohmann::json::object());
  for (const auto& [name, spec] : verbalizers.items()) {
    Verbalizer v;
    v.name = name;
    for (ValenceLabel label : kAllLabels) {
      v.words[index_of(label)] =
          require_field<std::vector<std::string>>(spec, std::string(to_string(label)).c_str());
    }
    v.validate();
    p.verbalizers.emplace(name, std::move(v));
  }
  return p;
}

nlohmann::json presets_to_json(const PromptPresets& presets) {
  nlohmann::json out;
  out["instructions"] = presets.instructions;
  out["verbalizers"] = nlohmann::json::object();
  for (const auto& [name, v] : presets.verbalizers) {
    nlohmann::json spec;
    for (ValenceLabel label : kAllLabels) {
      spec[std::string(to_string(label))] = v.words[index_of(label)];
    }
    out["verbalizers"][name] = spec;
  }
  return out;
}

PromptPresets load_presets(const std::filesystem::path& path) {
  return presets_from_json(read_json(path));
}

}  // namespace valence
