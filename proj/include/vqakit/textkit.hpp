#pragma once

// Answer normalization and Levenshtein distance.
//
// Normalization works on UTF-8 bytes: every rule only inspects ASCII
// characters, and ASCII bytes never occur inside a multi-byte UTF-8
// sequence, so non-ASCII text passes through untouched. Lowercasing is
// ASCII-only for the same reason.
//
// Edit distance is computed over Unicode scalar values (decoded code points),
// not bytes and not grapheme clusters.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vqakit {

struct NormalizationRules {
  bool lowercase = true;
  bool trim_whitespace = true;
  bool strip_terminal_punctuation = true;  // trailing . , ! ?
  bool collapse_internal_whitespace = true;
  bool drop_articles = true;               // standalone a / an / the

  static constexpr NormalizationRules all() { return {}; }
  static constexpr NormalizationRules none() {
    return {false, false, false, false, false};
  }

  friend bool operator==(const NormalizationRules&,
                         const NormalizationRules&) = default;
};

using EditDistance = std::size_t;

namespace detail {

constexpr bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

constexpr bool is_terminal_punct(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?';
}

constexpr char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool is_article(std::string_view token) {
  static constexpr std::array<std::string_view, 3> kArticles = {"a", "an",
                                                                "the"};
  return std::any_of(kArticles.begin(), kArticles.end(), [&](auto article) {
    return token.size() == article.size() &&
           std::equal(token.begin(), token.end(), article.begin(),
                      [](char x, char y) { return ascii_lower(x) == y; });
  });
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string strip_terminal(std::string_view s) {
  std::size_t e = s.size();
  while (e > 0 && is_terminal_punct(s[e - 1])) --e;
  return std::string(s.substr(0, e));
}

// Drops article tokens. Each surviving token keeps the whitespace run that
// preceded it in the input, except the first survivor, which takes the
// string's leading run; the trailing run is kept as-is. Surviving tokens are
// never glued together, so no new tokens can form.
inline std::string remove_articles(std::string_view s) {
  struct Token {
    std::size_t sep_begin, begin, end;
  };
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t sep = i;
    while (i < s.size() && is_space(s[i])) ++i;
    if (i == s.size()) break;
    const std::size_t b = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    tokens.push_back({sep, b, i});
  }
  if (tokens.empty()) return std::string(s);

  std::string out(s.substr(0, tokens.front().begin));
  bool first = true;
  for (const auto& t : tokens) {
    if (is_article(s.substr(t.begin, t.end - t.begin))) continue;
    if (!first) out.append(s.substr(t.sep_begin, t.begin - t.sep_begin));
    out.append(s.substr(t.begin, t.end - t.begin));
    first = false;
  }
  out.append(s.substr(tokens.back().end));
  return out;
}

inline std::string collapse_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_run = false;
  for (char c : s) {
    if (is_space(c)) {
      if (!in_run) out.push_back(' ');
      in_run = true;
    } else {
      out.push_back(c);
      in_run = false;
    }
  }
  return out;
}

inline std::string normalize_once(std::string_view s,
                                  const NormalizationRules& rules) {
  std::string out(s);
  if (rules.trim_whitespace) out = trim(out);
  if (rules.lowercase) {
    std::transform(out.begin(), out.end(), out.begin(), ascii_lower);
  }
  if (rules.strip_terminal_punctuation) out = strip_terminal(out);
  if (rules.drop_articles) out = remove_articles(out);
  if (rules.collapse_internal_whitespace) out = collapse_spaces(out);
  return out;
}

}  // namespace detail

/// Applies the enabled rules in the order trim, lowercase, strip terminal
/// punctuation, drop articles, collapse whitespace. One rule can expose work
/// for an earlier one ("yes. the" loses "the" and then ends in "."), so the
/// pass repeats until the string is stable; the result is therefore always a
/// fixed point and normalization is idempotent. Each pass either changes
/// nothing or shortens the string (lowercasing only acts once), so the loop
/// is bounded by the input length.
inline std::string normalize_answer(std::string_view s,
                                    const NormalizationRules& rules = {}) {
  std::string current(s);
  for (;;) {
    std::string next = detail::normalize_once(current, rules);
    if (next == current) return current;
    current = std::move(next);
  }
}

/// Decodes UTF-8 into Unicode scalar values. Malformed bytes are mapped one
/// by one into U+DC80..U+DCFF (lone surrogates, never valid scalars), which
/// keeps the decoding total and deterministic.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto byte = [&](std::size_t i) {
    return static_cast<std::uint8_t>(s[i]);
  };
  for (std::size_t i = 0; i < s.size();) {
    const std::uint8_t b0 = byte(i);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4, cp = b0 & 0x07, min = 0x10000;
    }
    bool ok = len != 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const std::uint8_t b = byte(i + k);
      ok = (b & 0xC0) == 0x80;
      cp = (cp << 6) | (b & 0x3F);
    }
    ok = ok && cp >= min && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    if (ok) {
      out.push_back(cp);
      i += len;
    } else {
      out.push_back(0xDC00 + b0);
      ++i;
    }
  }
  return out;
}

/// Unit-cost Levenshtein distance over any two random-access sequences with
/// equality-comparable elements. Two-row dynamic programme, O(|a|·|b|) time.
template <class SeqA, class SeqB>
EditDistance edit_distance(const SeqA& a, const SeqB& b) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1);
  std::vector<std::size_t> cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

inline EditDistance levenshtein(std::string_view a, std::string_view b) {
  return edit_distance(decode_utf8(a), decode_utf8(b));
}

/// Length in Unicode scalar values.
inline std::size_t scalar_length(std::string_view s) {
  return decode_utf8(s).size();
}

}  // namespace vqakit
