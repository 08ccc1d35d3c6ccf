#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace valence {

/// Closed three-class label set. The enumerator order doubles as the fixed
/// tie-break order used throughout (stigmatizing < privileging < neutral).
enum class ValenceLabel : std::size_t {
  kStigmatizing = 0,
  kPrivileging = 1,
  kNeutral = 2,
};

inline constexpr std::size_t kNumLabels = 3;

inline constexpr std::array<ValenceLabel, kNumLabels> kAllLabels = {
    ValenceLabel::kStigmatizing, ValenceLabel::kPrivileging, ValenceLabel::kNeutral};

/// A model output: a label, or nullopt when the output could not be mapped.
using Predicted = std::optional<ValenceLabel>;

constexpr std::size_t index_of(ValenceLabel label) noexcept {
  return static_cast<std::size_t>(label);
}

std::string_view to_string(ValenceLabel label) noexcept;
std::string_view to_string(const Predicted& predicted) noexcept;

/// Parses "stigmatizing" / "privileging" / "neutral" (exact, lowercase).
std::optional<ValenceLabel> parse_label(std::string_view text) noexcept;

/// Like parse_label, but throws ValidationError on anything else.
ValenceLabel require_label(std::string_view text);

/// Parses a label or the literal "unparseable".
Predicted parse_predicted(std::string_view text);

}  // namespace valence
