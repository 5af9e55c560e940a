// Copyright 2026 The DimCim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dimcim::text {

/// ASCII lower-casing. Bytes >= 0x80 (UTF-8 continuation and lead bytes)
/// pass through untouched.
std::string to_lower(std::string_view s);

std::string trim(std::string_view s);

/// Splits on every ASCII character that is not a letter or digit. Non-ASCII
/// bytes count as word characters so "café-colored" yields {"café", "colored"}.
/// Tokens are lower-cased.
std::vector<std::string> tokenize(std::string_view s);

/// Whole-word, case-insensitive containment: true iff the token sequence of
/// `phrase` occurs contiguously in the token sequence of `haystack`.
bool contains_phrase(std::string_view haystack, std::string_view phrase);

/// Like contains_phrase, but the final token of `noun` may also appear in a
/// simple plural form ("dog" matches "dogs", "bus" matches "buses").
bool contains_noun(std::string_view haystack, std::string_view noun);

/// Heuristic English singular of a lower-case token.
std::string singularize(std::string_view token);

/// "a" or "an" for the word that follows.
std::string_view indefinite_article(std::string_view next_word);

bool starts_with_word(std::string_view s, std::string_view word_prefix);

/// 64-bit FNV-1a; stable across platforms, used for seed derivation.
std::uint64_t fnv1a(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// CSV field quoting per RFC 4180 (only when needed).
std::string csv_field(std::string_view s);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace dimcim::text
