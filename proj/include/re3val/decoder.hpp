#pragma once

#include <string>
#include <vector>

#include "re3val/policy.hpp"
#include "re3val/trie.hpp"

namespace re3val {

struct DecodeConfig {
    std::size_t beam_size = 10;
    std::size_t max_titles_per_beam = 5;
    std::size_t max_total_tokens = 64;

    void validate() const;
};

enum class HypothesisState { InTitle, AtBoundary, Finished };

/// A partially or fully decoded list of titles.
struct Hypothesis {
    std::vector<std::string> titles;
    std::vector<std::vector<TokenId>> title_tokens;
    /// Tokens of the title currently being decoded.
    std::vector<TokenId> prefix;
    TitleTrie::NodeIndex node = TitleTrie::kRoot;
    std::vector<Step> steps;
    std::vector<double> step_log_probs;
    double log_prob = 0.0;
    HypothesisState state = HypothesisState::InTitle;

    std::vector<TokenId> actions() const;
};

/// Candidate tokens at a trie node: the node's children, plus EOS when a
/// title ends here and SEP when another title may still follow. Sorted by id.
std::vector<TokenId> candidate_tokens(const TitleTrie& trie, TitleTrie::NodeIndex node, std::size_t titles_emitted,
                                      std::size_t max_titles);

/// Advances `hyp` by one token taken from its candidate set.
void apply_action(Hypothesis& hyp, const TitleTrie& trie, TokenId action, std::vector<TokenId> allowed,
                  double log_prob);

/// Teacher-forcing action sequence that spells `titles` (at most
/// `max_titles` of them) followed by EOS.
std::vector<Step> target_steps(const TitleTrie& trie, const Vocabulary& vocab, const std::vector<std::string>& titles,
                               std::size_t max_titles);
std::vector<Step> target_steps_from_tokens(const TitleTrie& trie, const std::vector<std::vector<TokenId>>& titles,
                                           std::size_t max_titles);

/// Beam search over title lists where every step is restricted to
/// `candidate_tokens`. Returns up to `beam_size` finished hypotheses, best
/// first. Ties rank by token id, then by parent beam position.
std::vector<Hypothesis> constrained_beam_search(const PolicyParams& params, std::span<const TokenId> query,
                                                const TitleTrie& trie, const DecodeConfig& config);

/// Flattens hypothesis title lists in rank order, keeps first occurrences,
/// and truncates to `k`.
std::vector<std::string> select_top_titles(const std::vector<Hypothesis>& hypotheses, std::size_t k = 5);
std::vector<std::string> select_top_titles(const std::vector<std::vector<std::string>>& title_lists, std::size_t k = 5);

} // namespace re3val
