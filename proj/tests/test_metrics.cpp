#include <doctest.h>

#include <map>
#include <regex>

#include "re3val/error.hpp"
#include "re3val/metrics.hpp"
#include "re3val/random.hpp"
#include "naive.hpp"

using namespace re3val;


TEST_CASE("r-precision examples") {
    CHECK(r_precision({"C", "A", "B"}, {"A", "B", "C"}) == 1.0);
    CHECK(r_precision({"A", "C", "B"}, {"A", "B"}) == 0.5);
    CHECK(r_precision({"X", "Y"}, {"A"}) == 0.0);
    CHECK(r_precision({}, {"A"}) == 0.0);
    CHECK_THROWS_AS(r_precision({"A"}, {}), UndefinedMetricError);
}

TEST_CASE("repeated retrieved titles count once") {
    CHECK(r_precision({"A", "A", "B"}, {"A", "B"}) == 1.0);
    CHECK(recall_at_k({"A", "A", "A", "B"}, {"A", "B"}, 2) == 1.0);
}

TEST_CASE("recall@k examples") {
    CHECK(recall_at_k({"A", "B"}, {"A", "B"}, 5) == 1.0);
    CHECK(recall_at_k({"A", "X", "Y", "Z", "W", "B"}, {"A", "B"}, 5) == 0.5);
    CHECK(recall_at_k({"X", "A"}, {"A"}, 1) == 0.0);
    CHECK_THROWS_AS(recall_at_k({"A"}, {}, 5), UndefinedMetricError);
    CHECK_THROWS_AS(recall_at_k({"A"}, {"A"}, 0), ValidationError);
}

TEST_CASE("answer normalization") {
    CHECK(normalize_answer("The  Answer!") == "answer");
    CHECK(normalize_answer("A An THE") == "");
    CHECK(normalize_answer("it's the U.S.A.") == "its usa");
    CHECK(normalize_answer("  the theory  ") == "theory");
    for (std::string s : {"The  Answer!", "it's the U.S.A.", "  a  b ", "Then, an apple."})
        CHECK(normalize_answer(normalize_answer(s)) == normalize_answer(s));
}

TEST_CASE("exact match and F1") {
    CHECK(exact_match("Nile River", {"nile river"}) == 1.0);
    CHECK(token_f1("Nile River", {"nile river"}) == 1.0);
    CHECK(exact_match("cairo", {"nile"}) == 0.0);
    CHECK(token_f1("cairo", {"nile"}) == 0.0);
    CHECK(exact_match("nile river", {"the nile"}) == 0.0);
    CHECK(std::abs(token_f1("nile river", {"the nile"}) - 2.0 / 3.0) <= 1e-15);
    CHECK(exact_match("x", {"y", "X."}) == 1.0);
    CHECK(token_f1("", {""}) == 1.0);
    CHECK(token_f1("the", {"nile"}) == 0.0);
}

TEST_CASE("ROUGE-L") {
    CHECK(rouge_l("the cat sat", {"the cat sat"}) == 1.0);
    CHECK(rouge_l("dog runs", {"cat sat"}) == 0.0);
    CHECK(std::abs(rouge_l("the cat sat", {"cat sat down"}) - 2.0 / 3.0) <= 1e-15);
    CHECK(std::abs(rouge_l("cat sat on mat", {"cat on sat"}) - 4.0 / 7.0) <= 1e-15);
}

TEST_CASE("label accuracy") {
    CHECK(accuracy_label("SUPPORTS", "supports") == 1.0);
    CHECK(accuracy_label("REFUTES", "supports") == 0.0);
    std::vector<std::pair<std::string, std::string>> batch{
        {"SUPPORTS", "supports"}, {"REFUTES", "refutes"}, {"supports", "SUPPORTS"}, {"REFUTES", "supports"}};
    double sum = 0;
    for (const auto& [p, g] : batch) sum += accuracy_label(p, g);
    CHECK(sum / 4 == 0.75);
}

TEST_CASE("classifier metrics") {
    auto perfect = classifier_metrics({1, 0, 0, 0});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);

    auto negatives = classifier_metrics({0, 0, 0, 5});
    CHECK(negatives.precision == 0.0);
    CHECK(negatives.precision_undefined);
    CHECK(negatives.recall == 0.0);
    CHECK(negatives.recall_undefined);
    CHECK(negatives.accuracy == 1.0);
    CHECK_FALSE(negatives.accuracy_undefined);

    auto mixed = classifier_metrics({3, 1, 2, 4});
    CHECK(mixed.precision == 0.75);
    CHECK(mixed.recall == 0.6);
    CHECK(std::abs(mixed.f1 - 2.0 / 3.0) <= 1e-15);
    CHECK(mixed.accuracy == 0.7);

    CHECK(classifier_metrics({0, 0, 0, 0}).accuracy_undefined);
}

TEST_CASE("KILT gating") {
    CHECK(kilt_gate(1.0, 1.0) == 1.0);
    CHECK(kilt_gate(0.5, 1.0) == 0.0);
    CHECK(kilt_score({{1, 1}, {1, 0}, {0.5, 1}, {0, 1}}) == 0.25);
    CHECK(kilt_score({}) == 0.0);
}

TEST_CASE("scored queries respect the KILT bounds") {
    auto qa = score_query("q", {"A", "B"}, {"A"}, std::string("Nile"), {"the nile"}, DownstreamKind::QA, 5);
    CHECK(qa.r_precision == 1.0);
    CHECK(qa.em == 1.0);
    CHECK(qa.kilt_em == 1.0);
    auto miss = score_query("q", {"B", "A"}, {"A"}, std::string("Nile"), {"the nile"}, DownstreamKind::QA, 5);
    CHECK(miss.r_precision == 0.0);
    CHECK(miss.recall_at_k == 1.0);
    CHECK(miss.em == 1.0);
    CHECK(miss.kilt_em == 0.0);
    auto fc = score_query("q", {"A"}, {"A"}, std::string("SUPPORTS"), {"supports"}, DownstreamKind::FactCheck, 5);
    CHECK(fc.accuracy == 1.0);
    CHECK(fc.kilt_accuracy == 1.0);
    CHECK_FALSE(fc.em.has_value());
    auto dlg = score_query("q", {"A"}, {"A"}, std::string("the cat sat"), {"cat sat down"}, DownstreamKind::Dialogue, 5);
    CHECK(std::abs(*dlg.rouge_l - 2.0 / 3.0) <= 1e-15);
    CHECK(dlg.kilt_f1.has_value());
    auto none = score_query("q", {"A"}, {"A"}, std::nullopt, {"x"}, DownstreamKind::QA, 5);
    CHECK_FALSE(none.em.has_value());
}

TEST_CASE("randomized agreement with a naive reference") {
    Rng rng(2718);
    const std::vector<std::string> words{"the", "a", "An", "nile", "River", "delta,", "cairo.", "it's", "U.S.A.", "x"};
    auto phrase = [&] {
        std::string s;
        for (std::size_t i = 0; i < rng.below(6); ++i) s += (i ? " " : "") + words[rng.below(words.size())];
        return s;
    };
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<std::string> gold, retrieved, answers;
        for (std::size_t i = 0; i < 1 + rng.below(4); ++i) gold.push_back("T" + std::to_string(rng.below(8)));
        for (std::size_t i = 0; i < rng.below(10); ++i) retrieved.push_back("T" + std::to_string(rng.below(10)));
        for (std::size_t i = 0; i < 1 + rng.below(3); ++i) answers.push_back(phrase());
        std::size_t k = 1 + rng.below(6);
        auto pred = phrase();

        CHECK(std::abs(r_precision(retrieved, gold) - naive::r_precision(retrieved, gold)) <= 1e-12);
        CHECK(std::abs(recall_at_k(retrieved, gold, k) - naive::recall(retrieved, gold, k)) <= 1e-12);
        CHECK(normalize_answer(pred) == naive::normalize(pred));
        double em = 0;
        for (const auto& a : answers) em = std::max(em, naive::normalize(pred) == naive::normalize(a) ? 1.0 : 0.0);
        CHECK(exact_match(pred, answers) == em);
        CHECK(std::abs(token_f1(pred, answers) - naive::best(naive::f1_one, pred, answers)) <= 1e-12);
        CHECK(std::abs(rouge_l(pred, answers) - naive::best(naive::rouge_one, pred, answers)) <= 1e-12);
        CHECK(accuracy_label(pred, answers[0]) == (naive::normalize(pred) == naive::normalize(answers[0]) ? 1.0 : 0.0));
        // Symmetry for single golds.
        CHECK(std::abs(token_f1(pred, {answers[0]}) - token_f1(answers[0], {pred})) <= 1e-12);
        CHECK(std::abs(rouge_l(pred, {answers[0]}) - rouge_l(answers[0], {pred})) <= 1e-12);

        ConfusionCounts c{rng.below(5), rng.below(5), rng.below(5), rng.below(5)};
        auto m = classifier_metrics(c);
        double tp = c.tp, fp = c.fp, fn = c.fn, tn = c.tn;
        double p = tp + fp ? tp / (tp + fp) : 0, r = tp + fn ? tp / (tp + fn) : 0;
        CHECK(std::abs(m.precision - p) <= 1e-12);
        CHECK(std::abs(m.recall - r) <= 1e-12);
        CHECK(std::abs(m.f1 - (p + r ? 2 * p * r / (p + r) : 0)) <= 1e-12);
        CHECK(std::abs(m.accuracy - (tp + fp + fn + tn ? (tp + tn) / (tp + fp + fn + tn) : 0)) <= 1e-12);

        auto s = score_query("q", retrieved, gold, pred, answers, DownstreamKind::QA, k);
        double rp = naive::r_precision(retrieved, gold);
        CHECK(*s.kilt_em == (rp == 1.0 ? em : 0.0));
        CHECK(*s.kilt_f1 <= *s.f1);
        if (rp == 1.0 && k >= gold.size()) CHECK(s.recall_at_k == 1.0);
    }
}
