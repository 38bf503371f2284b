#include "theaitre/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

namespace theaitre::text {

bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view ltrim(std::string_view s) noexcept {
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return s.substr(i);
}

std::string_view rtrim(std::string_view s) noexcept {
  std::size_t n = s.size();
  while (n > 0 && is_space(s[n - 1])) --n;
  return s.substr(0, n);
}

std::string_view trim(std::string_view s) noexcept { return rtrim(ltrim(s)); }

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find('\n', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string utf8_reverse(std::string_view s) {
  std::vector<std::string_view> points;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  while (i < len) {
    std::int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, len, c);
    if (c < 0) i = start + 1;
    points.push_back(s.substr(static_cast<std::size_t>(start), static_cast<std::size_t>(i - start)));
  }
  std::string out;
  out.reserve(s.size());
  for (auto it = points.rbegin(); it != points.rend(); ++it) out += *it;
  return out;
}

std::size_t utf8_length(std::string_view s) noexcept {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto len = static_cast<std::int32_t>(s.size());
  std::int32_t i = 0;
  std::size_t n = 0;
  while (i < len) {
    std::int32_t start = i;
    UChar32 c;
    U8_NEXT(bytes, i, len, c);
    if (c < 0) i = start + 1;
    ++n;
  }
  return n;
}

std::string fold_word(std::string_view word) {
  std::vector<UChar32> points;
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(word.data());
  const auto len = static_cast<std::int32_t>(word.size());
  std::int32_t i = 0;
  while (i < len) {
    UChar32 c;
    U8_NEXT(bytes, i, len, c);
    points.push_back(c < 0 ? 0xFFFD : u_foldCase(c, U_FOLD_CASE_DEFAULT));
  }
  auto is_punct = [](UChar32 c) { return u_ispunct(c) || u_hasBinaryProperty(c, UCHAR_DASH); };
  auto first = std::find_if_not(points.begin(), points.end(), is_punct);
  auto last = std::find_if_not(points.rbegin(), std::make_reverse_iterator(first), is_punct).base();
  std::string out;
  for (auto it = first; it < last; ++it) {
    char buf[4];
    std::int32_t n = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), n, 4, *it, err);
    if (!err) out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace theaitre::text
