#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace histoner::utf8 {

// Decodes a UTF-8 string into unicode scalar values. Invalid byte sequences
// decode to U+FFFD one byte at a time so the walk always terminates.
std::vector<char32_t> decode(std::string_view text);

// Encodes a single scalar value; appends to out.
void append(std::string& out, char32_t cp);

std::string encode(const std::vector<char32_t>& cps);

// Number of unicode scalar values in text.
std::size_t scalar_count(std::string_view text);

bool is_whitespace(char32_t cp);

// ASCII punctuation ranges plus common typographic punctuation found in
// historical print (quotes, dashes, ellipsis, middle dot, guillemets).
bool is_punctuation(char32_t cp);

inline constexpr char32_t kLongS = 0x017F;

// Replaces every U+017F with 's'. Idempotent; all other code points pass
// through untouched.
std::string normalize_long_s(std::string_view text);

// Splits on unicode whitespace.
std::vector<std::string> split_whitespace(std::string_view text);

// Whitespace split followed by isolating punctuation code points as
// standalone words.
std::vector<std::string> pretokenize(std::string_view text);

}  // namespace histoner::utf8
