#include <doctest.h>

#include <map>
#include <set>

#include "re3val/decoder.hpp"
#include "re3val/error.hpp"
#include "support.hpp"

using namespace re3val;

namespace {

struct Fixture {
    Vocabulary vocab;
    TitleTrie trie;
    PolicyParams params;
    std::vector<TokenId> query;
};

Fixture random_fixture(Rng& rng, std::size_t words, std::size_t titles, std::size_t max_len, double scale) {
    auto vocab = testing::word_vocab(words);
    auto trie = TitleTrie::build(testing::random_titles(rng, titles, words, max_len), vocab);
    auto params = PolicyParams::random(PolicyShape{vocab.size(), 4, 6, 3}, rng.next(), scale);
    std::vector<TokenId> query;
    for (std::size_t i = 0; i < 1 + rng.below(4); ++i) query.push_back(static_cast<TokenId>(rng.below(vocab.size())));
    return {std::move(vocab), std::move(trie), std::move(params), std::move(query)};
}

} // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS((DecodeConfig{0, 5, 64}.validate()), ValidationError);
    CHECK_THROWS_AS((DecodeConfig{5, 0, 64}.validate()), ValidationError);
    CHECK_THROWS_AS((DecodeConfig{5, 5, 0}.validate()), ValidationError);
    CHECK_NOTHROW((DecodeConfig{}.validate()));
}

TEST_CASE("uniform policy over three one-word titles") {
    auto vocab = Vocabulary::build({"a b c"});
    auto trie = TitleTrie::build({"a", "b", "c"}, vocab);
    auto params = PolicyParams::zeros(PolicyShape{vocab.size(), 4, 4, 2});
    auto hyps = constrained_beam_search(params, std::vector<TokenId>{4}, trie, {3, 1, 16});
    REQUIRE(hyps.size() == 3);
    CHECK(hyps[0].titles == std::vector<std::string>{"a"});
    CHECK(hyps[1].titles == std::vector<std::string>{"b"});
    CHECK(hyps[2].titles == std::vector<std::string>{"c"});
    for (const auto& h : hyps) {
        CHECK(h.log_prob == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
        CHECK(h.state == HypothesisState::Finished);
        CHECK(h.actions().back() == Vocabulary::kEos);
    }
}

TEST_CASE("candidate set at a title boundary") {
    auto vocab = Vocabulary::build({"nile river"});
    auto trie = TitleTrie::build({"nile", "nile river"}, vocab);
    auto node = *trie.walk(std::vector<TokenId>{vocab.id("nile")});
    CHECK(candidate_tokens(trie, node, 0, 2) ==
          std::vector<TokenId>{Vocabulary::kEos, Vocabulary::kSep, vocab.id("river")});
    CHECK(candidate_tokens(trie, node, 1, 2) == std::vector<TokenId>{Vocabulary::kEos, vocab.id("river")});
    CHECK(candidate_tokens(trie, TitleTrie::kRoot, 0, 2) == std::vector<TokenId>{vocab.id("nile")});
}

TEST_CASE("beam 1 is the greedy walk") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        auto f = random_fixture(rng, 6, 10, 3, 1.0);
        auto hyps = constrained_beam_search(f.params, f.query, f.trie, {1, 2, 32});
        REQUIRE(hyps.size() == 1);
        // Independent greedy walk over the legal continuations.
        auto legal = testing::enumerate_legal(f.trie.enumerate_titles(), 2);
        std::vector<TokenId> prefix;
        while (true) {
            std::set<TokenId> options;
            for (const auto& s : legal)
                if (s.actions.size() > prefix.size() && std::equal(prefix.begin(), prefix.end(), s.actions.begin()))
                    options.insert(s.actions[prefix.size()]);
            if (options.empty()) break;
            auto logits = score_next(f.params, f.query, prefix);
            TokenId best = *options.begin();
            for (TokenId o : options)
                if (logits[o] > logits[best]) best = o;
            prefix.push_back(best);
            if (best == Vocabulary::kEos) break;
        }
        CHECK(hyps[0].actions() == prefix);
    }
}

TEST_CASE("exhaustive beam equals brute-force enumeration") {
    Rng rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        auto f = random_fixture(rng, 4, 1 + rng.below(12), 3, 1.5);
        auto legal = testing::enumerate_legal(f.trie.enumerate_titles(), 2);
        auto hyps = constrained_beam_search(f.params, f.query, f.trie, {legal.size(), 2, 64});
        REQUIRE(hyps.size() == legal.size());
        std::map<std::vector<TokenId>, double> oracle;
        for (const auto& s : legal) oracle[s.actions] = testing::score_sequence(f.params, f.query, s);
        for (const auto& h : hyps) {
            auto it = oracle.find(h.actions());
            REQUIRE(it != oracle.end());
            CHECK(std::abs(it->second - h.log_prob) <= 1e-9);
        }
        for (std::size_t i = 1; i < hyps.size(); ++i) CHECK(hyps[i - 1].log_prob >= hyps[i].log_prob);
    }
}

TEST_CASE("hypothesis scores equal sequence_log_prob of their actions") {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto f = random_fixture(rng, 10, 40, 3, 1.0);
        for (const auto& h : constrained_beam_search(f.params, f.query, f.trie, {5, 3, 64})) {
            CHECK(std::abs(sequence_log_prob(f.params, f.query, h.steps) - h.log_prob) <= 1e-9);
            CHECK(h.titles.size() <= 3);
            for (const auto& toks : h.title_tokens) CHECK(f.trie.contains_title(toks));
            for (double lp : h.step_log_probs) CHECK(lp <= 0.0);
        }
    }
}

TEST_CASE("an exhaustive beam is never beaten by a smaller one") {
    Rng rng(13);
    for (int trial = 0; trial < 40; ++trial) {
        auto f = random_fixture(rng, 4, 8, 2, 2.0);
        auto legal = testing::enumerate_legal(f.trie.enumerate_titles(), 2);
        double best = constrained_beam_search(f.params, f.query, f.trie, {legal.size(), 2, 64}).front().log_prob;
        for (std::size_t beam = 1; beam < legal.size(); beam += 3)
            CHECK(constrained_beam_search(f.params, f.query, f.trie, {beam, 2, 64}).front().log_prob <= best + 1e-12);
    }
}

TEST_CASE("decoding is deterministic") {
    Rng rng(8);
    auto f = random_fixture(rng, 10, 30, 3, 1.0);
    auto a = constrained_beam_search(f.params, f.query, f.trie, {6, 3, 64});
    auto b = constrained_beam_search(f.params, f.query, f.trie, {6, 3, 64});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].actions() == b[i].actions());
        CHECK(a[i].log_prob == b[i].log_prob);
    }
}

TEST_CASE("token budget too small for any title") {
    auto vocab = Vocabulary::build({"a b c"});
    auto trie = TitleTrie::build({"a b c"}, vocab);
    auto params = PolicyParams::zeros(PolicyShape{vocab.size(), 2, 2, 1});
    CHECK_THROWS_AS(constrained_beam_search(params, std::vector<TokenId>{4}, trie, {2, 1, 3}), TruncationError);
    CHECK(constrained_beam_search(params, std::vector<TokenId>{4}, trie, {2, 1, 4}).size() == 1);
}

TEST_CASE("target steps spell titles with separators") {
    auto vocab = Vocabulary::build({"nile river congo"});
    auto trie = TitleTrie::build({"Nile", "Nile River", "Congo"}, vocab);
    auto steps = target_steps(trie, vocab, {"Nile River", "Congo"}, 5);
    std::vector<TokenId> actions;
    for (const auto& s : steps) actions.push_back(s.action);
    CHECK(actions == std::vector<TokenId>{vocab.id("nile"), vocab.id("river"), Vocabulary::kSep, vocab.id("congo"),
                                          Vocabulary::kEos});
    CHECK(steps[1].allowed == std::vector<TokenId>{Vocabulary::kEos, Vocabulary::kSep, vocab.id("river")});
    auto capped = target_steps(trie, vocab, {"Nile", "Congo"}, 1);
    CHECK(capped.back().action == Vocabulary::kEos);
    CHECK(capped.size() == 2);
    CHECK_THROWS_AS(target_steps(trie, vocab, {"Amazon"}, 5), ValidationError);
}

TEST_CASE("select_top_titles examples") {
    std::vector<std::vector<std::string>> beams{{"A", "B"}, {"B", "C"}};
    CHECK(select_top_titles(beams, 5) == std::vector<std::string>{"A", "B", "C"});
    CHECK(select_top_titles(std::vector<std::vector<std::string>>{{"A"}}, 5) == std::vector<std::string>{"A"});
    CHECK(select_top_titles(beams, 2) == std::vector<std::string>{"A", "B"});
}

TEST_CASE("select_top_titles agrees with a flatten-and-dedup reference") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::vector<std::string>> beams(10);
        for (auto& b : beams)
            for (int i = 0; i < 5; ++i) b.push_back("T" + std::to_string(rng.below(15)));
        std::size_t k = 1 + rng.below(8);
        std::vector<std::string> ref;
        for (const auto& b : beams)
            for (const auto& t : b)
                if (ref.size() < k && std::find(ref.begin(), ref.end(), t) == ref.end()) ref.push_back(t);
        CHECK(select_top_titles(beams, k) == ref);
    }
}
