// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#include "dimcim/text.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace dimcim::text {
namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c >= 0x80;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool match_at(const std::vector<std::string>& hay, std::size_t pos,
              const std::vector<std::string>& needle, bool plural_last) {
  for (std::size_t j = 0; j < needle.size(); ++j) {
    const auto& h = hay[pos + j];
    if (h == needle[j]) continue;
    if (plural_last && j + 1 == needle.size() &&
        (singularize(h) == needle[j] || h == needle[j] + "s" || h == needle[j] + "es")) {
      continue;
    }
    return false;
  }
  return true;
}

bool contains_tokens(std::string_view haystack, std::string_view phrase,
                     bool plural_last) {
  const auto needle = tokenize(phrase);
  if (needle.empty()) return false;
  const auto hay = tokenize(haystack);
  if (hay.size() < needle.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    if (match_at(hay, i, needle, plural_last)) return true;
  }
  return false;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

bool contains_phrase(std::string_view haystack, std::string_view phrase) {
  return contains_tokens(haystack, phrase, false);
}

bool contains_noun(std::string_view haystack, std::string_view noun) {
  return contains_tokens(haystack, noun, true);
}

std::string singularize(std::string_view token) {
  std::string t(token);
  if (t.size() <= 3) return t;
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 8> kIrregular{{
      {"people", "person"},
      {"children", "child"},
      {"women", "woman"},
      {"men", "man"},
      {"mice", "mouse"},
      {"geese", "goose"},
      {"knives", "knife"},
      {"sheep", "sheep"},
  }};
  for (auto [plural, single] : kIrregular) {
    if (t == plural) return std::string(single);
  }
  if (ends_with(t, "ies") && t.size() > 4) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "ches") || ends_with(t, "shes") || ends_with(t, "sses") ||
      ends_with(t, "xes") || ends_with(t, "zes")) {
    return t.substr(0, t.size() - 2);
  }
  if (ends_with(t, "ss") || ends_with(t, "us") || ends_with(t, "is")) return t;
  if (ends_with(t, "s")) return t.substr(0, t.size() - 1);
  return t;
}

std::string_view indefinite_article(std::string_view next_word) {
  const std::string w = to_lower(next_word);
  if (w.empty()) return "a";
  // Vowel letters that take "a", and silent-h words that take "an".
  static constexpr std::array<std::string_view, 10> kConsonantSound{
      "uni", "use", "usu", "uten", "ure", "euro", "ewe", "one", "once", "ubiq"};
  static constexpr std::array<std::string_view, 4> kVowelSound{"hour", "honest", "honor",
                                                              "heir"};
  for (auto p : kConsonantSound) {
    if (w.rfind(p, 0) == 0) return "a";
  }
  for (auto p : kVowelSound) {
    if (w.rfind(p, 0) == 0) return "an";
  }
  switch (w.front()) {
    case 'a': case 'e': case 'i': case 'o': case 'u':
      return "an";
    default:
      return "a";
  }
}

bool starts_with_word(std::string_view s, std::string_view word_prefix) {
  const auto prefix = tokenize(word_prefix);
  if (prefix.empty()) return false;
  const auto tokens = tokenize(s);
  if (tokens.size() < prefix.size()) return false;
  return std::equal(prefix.begin(), prefix.end(), tokens.begin());
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";  // folds -0
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

}  // namespace dimcim::text
