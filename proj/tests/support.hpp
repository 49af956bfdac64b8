#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "re3val/corpus.hpp"
#include "re3val/policy.hpp"
#include "re3val/random.hpp"
#include "re3val/trie.hpp"

namespace testing {

using re3val::TokenId;
using re3val::Vocabulary;

class TempDir {
  public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("re3val_test_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

inline std::string source_dir() { return RE3VAL_SOURCE_DIR; }

/// Vocabulary of `n` words "w0".."w{n-1}" after the special tokens.
inline Vocabulary word_vocab(std::size_t n) {
    Vocabulary v;
    for (std::size_t i = 0; i < n; ++i) v.add("w" + std::to_string(i));
    return v;
}

/// `count` titles of 1..max_len words over the first `words` vocabulary words.
inline std::vector<std::string> random_titles(re3val::Rng& rng, std::size_t count, std::size_t words,
                                              std::size_t max_len) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t len = 1 + rng.below(max_len);
        std::string t;
        for (std::size_t j = 0; j < len; ++j) t += (j ? " w" : "w") + std::to_string(rng.below(words));
        out.push_back(t);
    }
    return out;
}

inline std::string random_text(re3val::Rng& rng, std::size_t words, std::size_t pool) {
    std::string out;
    for (std::size_t i = 0; i < words; ++i) out += (i ? " t" : "t") + std::to_string(rng.below(pool));
    return out;
}

/// Direct log-softmax of `logits` over `allowed`, evaluated at `pick`.
inline double direct_log_prob(const std::vector<double>& logits, const std::vector<TokenId>& allowed, TokenId pick) {
    double z = 0.0;
    for (TokenId a : allowed) z += std::exp(logits[a]);
    return logits[pick] - std::log(z);
}

/// A legal title list written as actions, with the candidate set of every step.
struct LegalSequence {
    std::vector<TokenId> actions;
    std::vector<std::vector<TokenId>> allowed;
};

/// Every legal action sequence for lists of 1..max_titles titles drawn (with
/// repetition) from `titles`, built from the title set alone.
inline std::vector<LegalSequence> enumerate_legal(const std::vector<std::vector<TokenId>>& title_list,
                                                  std::size_t max_titles) {
    std::set<std::vector<TokenId>> titles(title_list.begin(), title_list.end());
    auto options = [&](const std::vector<TokenId>& prefix, std::size_t emitted) {
        std::set<TokenId> out;
        for (const auto& t : titles)
            if (t.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), t.begin())) out.insert(t[prefix.size()]);
        if (titles.count(prefix)) {
            out.insert(Vocabulary::kEos);
            if (emitted + 1 < max_titles) out.insert(Vocabulary::kSep);
        }
        return std::vector<TokenId>(out.begin(), out.end());
    };
    std::vector<LegalSequence> out;
    std::vector<std::vector<TokenId>> chosen;
    auto emit = [&](auto&& self) -> void {
        if (!chosen.empty()) {
            LegalSequence s;
            std::size_t emitted = 0;
            for (std::size_t i = 0; i < chosen.size(); ++i) {
                std::vector<TokenId> prefix;
                for (TokenId tok : chosen[i]) {
                    s.allowed.push_back(options(prefix, emitted));
                    s.actions.push_back(tok);
                    prefix.push_back(tok);
                }
                s.allowed.push_back(options(prefix, emitted));
                s.actions.push_back(i + 1 == chosen.size() ? Vocabulary::kEos : Vocabulary::kSep);
                ++emitted;
            }
            out.push_back(std::move(s));
        }
        if (chosen.size() == max_titles) return;
        for (const auto& t : titles) {
            chosen.push_back(t);
            self(self);
            chosen.pop_back();
        }
    };
    emit(emit);
    return out;
}

inline double score_sequence(const re3val::PolicyParams& params, const std::vector<TokenId>& query,
                             const LegalSequence& s) {
    double total = 0.0;
    std::vector<TokenId> prefix;
    for (std::size_t i = 0; i < s.actions.size(); ++i) {
        total += direct_log_prob(re3val::score_next(params, query, prefix), s.allowed[i], s.actions[i]);
        prefix.push_back(s.actions[i]);
    }
    return total;
}

} // namespace testing
