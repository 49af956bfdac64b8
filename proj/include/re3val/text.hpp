#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace re3val {

/// Splits on runs of ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);

std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ");

std::string_view trim(std::string_view text);

/// First `n` whitespace-delimited words, re-joined with single spaces.
std::string first_words(std::string_view text, std::size_t n);

/// Last `n` whitespace-delimited words, re-joined with single spaces.
std::string last_words(std::string_view text, std::size_t n);

std::size_t word_count(std::string_view text);

bool is_ascii_punct(char c);

/// Lowercases, removes ASCII punctuation and splits on whitespace. This is
/// the term stream shared by the tokenizer and the BM25 index.
std::vector<std::string> normalize_words(std::string_view text);

} // namespace re3val
