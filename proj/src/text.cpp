#include "re3val/text.hpp"

#include <cctype>

namespace re3val {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

} // namespace

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

std::string_view trim(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return text.substr(b, e - b);
}

std::string first_words(std::string_view text, std::size_t n) {
    auto words = split_words(text);
    if (words.size() > n) words.resize(n);
    return join_words(words);
}

std::string last_words(std::string_view text, std::size_t n) {
    auto words = split_words(text);
    if (words.size() > n) words.erase(words.begin(), words.end() - static_cast<std::ptrdiff_t>(n));
    return join_words(words);
}

std::size_t word_count(std::string_view text) { return split_words(text).size(); }

bool is_ascii_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 128 && std::ispunct(u);
}

std::vector<std::string> normalize_words(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (char c : text) {
        if (is_ascii_punct(c)) continue;
        auto u = static_cast<unsigned char>(c);
        cleaned.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : c);
    }
    return split_words(cleaned);
}

} // namespace re3val
