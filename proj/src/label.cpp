#include "valence/label.hpp"

#include "valence/error.hpp"

namespace valence {

std::string_view to_string(ValenceLabel label) noexcept {
  switch (label) {
    case ValenceLabel::kStigmatizing:
      return "stigmatizing";
    case ValenceLabel::kPrivileging:
      return "privileging";
    case ValenceLabel::kNeutral:
      return "neutral";
  }
  return "neutral";
}

std::string_view to_string(const Predicted& predicted) noexcept {
  return predicted ? to_string(*predicted) : std::string_view("unparseable");
}

std::optional<ValenceLabel> parse_label(std::string_view text) noexcept {
  for (ValenceLabel label : kAllLabels) {
    if (text == to_string(label)) return label;
  }
  return std::nullopt;
}

ValenceLabel require_label(std::string_view text) {
  if (auto label = parse_label(text)) return *label;
  throw ValidationError("invalid label '" + std::string(text) +
                        "' (expected stigmatizing, privileging or neutral)");
}

Predicted parse_predicted(std::string_view text) {
  if (text == "unparseable") return std::nullopt;
  return require_label(text);
}

}  // namespace valence
