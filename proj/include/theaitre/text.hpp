#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace theaitre::text {

bool is_space(char c) noexcept;
std::string_view trim(std::string_view s) noexcept;
std::string_view rtrim(std::string_view s) noexcept;
std::string_view ltrim(std::string_view s) noexcept;

/// Splits on '\n'. An empty input yields one empty piece.
std::vector<std::string_view> split_lines(std::string_view s);

/// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string_view> split_words(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Code-point reversal. Invalid sequences are reversed byte-wise.
std::string utf8_reverse(std::string_view s);

std::size_t utf8_length(std::string_view s) noexcept;

/// Lowercases via Unicode simple case folding and strips leading and
/// trailing punctuation. Used for content-word extraction.
std::string fold_word(std::string_view word);

}  // namespace theaitre::text
