#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "valence/label.hpp"

namespace valence {

enum class TemplateKind {
  kAnchored,
  kPrimed,
  kCloze,
  kClozePrimed,
  kInstruction,
  kInstructionPrimed,
};

std::string_view to_string(TemplateKind kind) noexcept;
TemplateKind parse_template_kind(std::string_view text);

bool is_primed(TemplateKind kind) noexcept;
bool is_cloze(TemplateKind kind) noexcept;

struct PromptTemplate {
  TemplateKind kind = TemplateKind::kAnchored;
  std::string instruction_text;     // instruction kinds only
  std::string mask_token = "[MASK]";

  void validate() const;
};

/// Renders a model input. Layouts, with {mask} the template's mask token:
///   anchored            {text}
///   primed              Word: {word} [...] {text} [...]
///   cloze               {text} This sentence is: {mask}
///   cloze_primed        {text} Keyword is: {word}. This sentence is: {mask}
///   instruction         {instruction}. {text}
///   instruction_primed  {instruction}. Word: {word} [...] {text} [...]
/// The ". " after an instruction collapses to " " when it already ends in
/// terminal punctuation. Throws ValidationError when a primed kind is given
/// no keyword.
std::string render(std::string_view window_text, std::optional<std::string_view> keyword,
                   const PromptTemplate& tmpl);

/// Class-to-words mapping read out at the mask slot.
struct Verbalizer {
  std::string name;
  std::array<std::vector<std::string>, kNumLabels> words;  // indexed by ValenceLabel

  /// Every class non-empty; word lists disjoint across classes.
  void validate() const;
  std::vector<std::string> all_words() const;
};

struct ClassScores {
  std::array<double, kNumLabels> p{};  // indexed by ValenceLabel

  double operator[](ValenceLabel label) const noexcept { return p[index_of(label)]; }
};

using WordLogits = std::map<std::string, double, std::less<>>;

/// Mean logit per class, shifted by the maximum class mean, then softmax.
/// Throws DomainError naming the first verbalizer word without a logit.
ClassScores verbalize(const WordLogits& logits, const Verbalizer& verbalizer);

/// Highest-probability label; exact ties resolve stigmatizing, privileging,
/// neutral in that order.
ValenceLabel argmax_label(const ClassScores& scores) noexcept;

/// Lowercases and scans for the earliest label word; nullopt when none occurs.
Predicted postprocess_generation(std::string_view raw);

struct PromptPresets {
  std::map<std::string, Verbalizer> verbalizers;
  std::map<std::string, std::string> instructions;

  const Verbalizer& verbalizer(std::string_view name) const;
  const std::string& instruction(std::string_view name) const;
};

/// Single- and multi-word verbalizers plus the human and optimized instruction
/// texts. The same data ships as config/presets.json.
const PromptPresets& builtin_presets();

PromptPresets load_presets(const std::filesystem::path& path);
PromptPresets presets_from_json(const nlohmann::json& json);
nlohmann::json presets_to_json(const PromptPresets& presets);

}  // namespace valence
