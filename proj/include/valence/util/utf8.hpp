#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace valence::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Invalid sequences decode to
/// U+FFFD one byte at a time, so decoding never fails.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view scalars);

/// Number of Unicode scalar values in `bytes`.
std::size_t length(std::string_view bytes);

/// Substring by scalar offsets [begin, end), clamped to the text.
std::string substr(std::string_view bytes, std::size_t begin, std::size_t end);

/// Word characters are letters, digits and underscore. Non-ASCII scalars are
/// word characters unless they fall in a punctuation, symbol or space block.
bool is_word_char(char32_t c) noexcept;

/// Simple case folding for ASCII, Latin-1, Latin Extended-A, Greek and
/// Cyrillic. Other scalars are returned unchanged.
char32_t fold_case(char32_t c) noexcept;

std::u32string fold_case(std::u32string_view text);

/// Lowercases a UTF-8 string with fold_case.
std::string to_lower(std::string_view bytes);

}  // namespace valence::utf8
