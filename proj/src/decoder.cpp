#include "re3val/decoder.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "re3val/error.hpp"

namespace re3val {

void DecodeConfig::validate() const {
    if (beam_size == 0 || max_titles_per_beam == 0 || max_total_tokens == 0)
        throw ValidationError("decode config values must be positive");
}

std::vector<TokenId> Hypothesis::actions() const {
    std::vector<TokenId> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action);
    return out;
}

std::vector<TokenId> candidate_tokens(const TitleTrie& trie, TitleTrie::NodeIndex node, std::size_t titles_emitted,
                                      std::size_t max_titles) {
    const auto allowed = trie.allowed_at(node);
    std::vector<TokenId> out;
    out.reserve(allowed.tokens.size() + 2);
    if (allowed.title_complete) {
        out.push_back(Vocabulary::kEos);
        if (titles_emitted + 1 < max_titles) out.push_back(Vocabulary::kSep);
    }
    out.insert(out.end(), allowed.tokens.begin(), allowed.tokens.end());
    std::sort(out.begin(), out.end());
    return out;
}

void apply_action(Hypothesis& hyp, const TitleTrie& trie, TokenId action, std::vector<TokenId> allowed,
                  double log_prob) {
    hyp.steps.push_back({action, std::move(allowed)});
    hyp.step_log_probs.push_back(log_prob);
    hyp.log_prob += log_prob;
    if (action == Vocabulary::kEos || action == Vocabulary::kSep) {
        const auto title = trie.node(hyp.node).title;
        if (title == TitleTrie::kNoTitle) throw ConstraintViolation("title boundary at a non-terminal trie node");
        hyp.titles.push_back(trie.surface(title));
        hyp.title_tokens.push_back(std::move(hyp.prefix));
        hyp.prefix.clear();
        hyp.node = TitleTrie::kRoot;
        hyp.state = action == Vocabulary::kEos ? HypothesisState::Finished : HypothesisState::InTitle;
        return;
    }
    const auto& children = trie.node(hyp.node).children;
    auto it = children.find(action);
    if (it == children.end()) throw ConstraintViolation("token " + std::to_string(action) + " leaves the title trie");
    hyp.prefix.push_back(action);
    hyp.node = it->second;
    hyp.state = trie.node(hyp.node).title != TitleTrie::kNoTitle ? HypothesisState::AtBoundary
                                                                  : HypothesisState::InTitle;
}

std::vector<Step> target_steps_from_tokens(const TitleTrie& trie, const std::vector<std::vector<TokenId>>& titles,
                                           std::size_t max_titles) {
    if (titles.empty()) throw ValidationError("target title list is empty");
    const std::size_t n = std::min(titles.size(), max_titles);
    Hypothesis hyp;
    for (std::size_t i = 0; i < n; ++i) {
        for (TokenId tok : titles[i]) {
            auto allowed = candidate_tokens(trie, hyp.node, hyp.titles.size(), max_titles);
            if (!std::binary_search(allowed.begin(), allowed.end(), tok))
                throw ConstraintViolation("target title is not in the title trie");
            apply_action(hyp, trie, tok, std::move(allowed), 0.0);
        }
        TokenId boundary = i + 1 == n ? Vocabulary::kEos : Vocabulary::kSep;
        auto allowed = candidate_tokens(trie, hyp.node, hyp.titles.size(), max_titles);
        if (!std::binary_search(allowed.begin(), allowed.end(), boundary))
            throw ConstraintViolation("target title is not in the title trie");
        apply_action(hyp, trie, boundary, std::move(allowed), 0.0);
    }
    return hyp.steps;
}

std::vector<Step> target_steps(const TitleTrie& trie, const Vocabulary& vocab, const std::vector<std::string>& titles,
                               std::size_t max_titles) {
    std::vector<std::vector<TokenId>> tokens;
    for (const auto& t : titles) tokens.push_back(tokenize(t, vocab));
    return target_steps_from_tokens(trie, tokens, max_titles);
}

namespace {

struct Candidate {
    double score;
    TokenId token;
    std::size_t parent;
    double log_prob;
};

bool better_finished(const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    const auto aa = a.actions(), ba = b.actions();
    return std::lexicographical_compare(aa.begin(), aa.end(), ba.begin(), ba.end());
}

} // namespace

std::vector<Hypothesis> constrained_beam_search(const PolicyParams& params, std::span<const TokenId> query,
                                                const TitleTrie& trie, const DecodeConfig& config) {
    config.validate();
    if (trie.title_count() == 0) throw ValidationError("title trie is empty");

    std::vector<Hypothesis> live(1);
    std::vector<Hypothesis> finished;
    std::vector<std::vector<TokenId>> live_allowed;

    for (std::size_t t = 0; t < config.max_total_tokens && !live.empty(); ++t) {
        std::vector<Candidate> candidates;
        live_allowed.assign(live.size(), {});
        for (std::size_t p = 0; p < live.size(); ++p) {
            const auto& hyp = live[p];
            live_allowed[p] = candidate_tokens(trie, hyp.node, hyp.titles.size(), config.max_titles_per_beam);
            const auto logits = score_next(params, query, hyp.actions());
            const auto logp = masked_log_softmax(logits, live_allowed[p]);
            for (TokenId tok : live_allowed[p]) candidates.push_back({hyp.log_prob + logp[tok], tok, p, logp[tok]});
        }
        const std::size_t keep = std::min(config.beam_size, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                          [](const Candidate& a, const Candidate& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.token != b.token) return a.token < b.token;
                              return a.parent < b.parent;
                          });
        std::vector<Hypothesis> next;
        for (std::size_t i = 0; i < keep; ++i) {
            const auto& c = candidates[i];
            Hypothesis hyp = live[c.parent];
            apply_action(hyp, trie, c.token, live_allowed[c.parent], c.log_prob);
            // Summing per-step terms keeps the score equal to sequence_log_prob bit for bit.
            double total = 0.0;
            for (double lp : hyp.step_log_probs) total += lp;
            hyp.log_prob = total;
            (hyp.state == HypothesisState::Finished ? finished : next).push_back(std::move(hyp));
        }
        live = std::move(next);

        if (finished.size() >= config.beam_size && !live.empty()) {
            std::sort(finished.begin(), finished.end(), better_finished);
            const double kth = finished[config.beam_size - 1].log_prob;
            double best_live = live.front().log_prob;
            for (const auto& h : live) best_live = std::max(best_live, h.log_prob);
            // Log-probabilities only decrease, so no live beam can overtake.
            if (best_live < kth) break;
        }
    }

    if (finished.empty()) {
        std::ostringstream msg;
        msg << "no hypothesis finished within " << config.max_total_tokens << " tokens; live beams:";
        for (const auto& h : live) {
            msg << " [";
            for (std::size_t i = 0; i < h.titles.size(); ++i) msg << (i ? " | " : "") << h.titles[i];
            msg << (h.titles.empty() ? "" : " | ") << "<" << h.prefix.size() << " tokens>]";
        }
        throw TruncationError(msg.str());
    }
    std::sort(finished.begin(), finished.end(), better_finished);
    if (finished.size() > config.beam_size) finished.resize(config.beam_size);
    return finished;
}

std::vector<std::string> select_top_titles(const std::vector<std::vector<std::string>>& title_lists, std::size_t k) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& list : title_lists) {
        for (const auto& t : list) {
            if (out.size() >= k) return out;
            if (seen.insert(t).second) out.push_back(t);
        }
    }
    return out;
}

std::vector<std::string> select_top_titles(const std::vector<Hypothesis>& hypotheses, std::size_t k) {
    std::vector<std::vector<std::string>> lists;
    lists.reserve(hypotheses.size());
    for (const auto& h : hypotheses) lists.push_back(h.titles);
    return select_top_titles(lists, k);
}

} // namespace re3val
