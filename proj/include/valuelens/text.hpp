#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace valuelens::text {

// Lowercase tokens produced by `tokenize`. Never contains empty tokens.
using TokenSeq = std::vector<std::string>;

// Unicode NFC normalization of UTF-8 input. Invalid sequences are replaced
// with U+FFFD.
std::string nfc(std::string_view utf8);

// Maps curly single/double quotes to their ASCII forms. Applied only for
// matching and tokenization; stored sentence text keeps the original quotes.
std::string straighten_quotes(std::string_view utf8);

bool is_space(char c);
std::string_view trim(std::string_view s);
// Trims and collapses every run of whitespace to a single ASCII space.
std::string collapse_whitespace(std::string_view s);
std::vector<std::string_view> split_whitespace(std::string_view s);

// Shared tokenizer for keyword matching, BLEU and feature hashing.
// Quotes are straightened, then the text is split on whitespace and on every
// code point that is neither a letter, a digit nor a combining mark; the
// separators are dropped and the remaining runs are lowercased.
//   "The cat's mat."                -> the cat s mat
//   "GPT-4 labels 10,000 sentences" -> gpt 4 labels 10 000 sentences
TokenSeq tokenize(std::string_view utf8);

// Number of Unicode code points in valid UTF-8 (continuation bytes skipped).
std::size_t code_point_count(std::string_view utf8);

std::string to_lower_ascii(std::string_view s);

}  // namespace valuelens::text
