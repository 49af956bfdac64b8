#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace re3val {

/// With R distinct gold titles, the share of the top-R retrieved titles
/// that are gold. Repeated titles in `retrieved` count once, at their
/// first position. Throws UndefinedMetricError when `gold` is empty.
double r_precision(const std::vector<std::string>& retrieved, const std::vector<std::string>& gold);

/// Share of distinct gold titles found among the top-k retrieved.
double recall_at_k(const std::vector<std::string>& retrieved, const std::vector<std::string>& gold, std::size_t k);

/// Lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace. Same order of operations as the KILT/SQuAD evaluators.
std::string normalize_answer(std::string_view text);

/// 1 if the normalized prediction equals any normalized gold.
double exact_match(std::string_view pred, const std::vector<std::string>& golds);

/// Bag-of-tokens F1 on normalized text, max over golds. Two empty
/// token lists score 1, one empty list scores 0.
double token_f1(std::string_view pred, const std::vector<std::string>& golds);

/// LCS-based F1 (beta = 1), max over golds. Tokens are lowercased with
/// punctuation removed; articles are kept.
double rouge_l(std::string_view pred, const std::vector<std::string>& golds);

double accuracy_label(std::string_view pred, std::string_view gold);

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct ClassifierMetrics {
    double precision = 0, recall = 0, f1 = 0, accuracy = 0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
    bool accuracy_undefined = false;
};

ClassifierMetrics classifier_metrics(const ConfusionCounts& c);

/// Downstream score credited only when the query's retrieval is perfect.
double kilt_gate(double r_precision, double downstream);

struct GatedPair {
    double r_precision = 0;
    double downstream = 0;
};

/// Mean of gated scores; 0 for an empty list.
double kilt_score(const std::vector<GatedPair>& per_query);

/// Per-query retrieval and downstream scores. Downstream entries are absent
/// when no prediction or gold answer is available.
struct QueryScores {
    std::string id;
    double r_precision = 0;
    double recall_at_k = 0;
    std::optional<double> em, f1, rouge_l, accuracy;
    std::optional<double> kilt_em, kilt_f1, kilt_rouge_l, kilt_accuracy;
};

struct EvalReport {
    std::size_t k = 5;
    std::vector<QueryScores> queries;

    struct Aggregate {
        double r_precision = 0, recall_at_k = 0;
        std::optional<double> em, f1, rouge_l, accuracy;
        std::optional<double> kilt_em, kilt_f1, kilt_rouge_l, kilt_accuracy;
    };
    Aggregate aggregate() const;
};

enum class DownstreamKind { QA, FactCheck, Dialogue };

/// Scores one query. `answer` is the reader prediction, if any.
QueryScores score_query(const std::string& id, const std::vector<std::string>& retrieved,
                        const std::vector<std::string>& gold_titles, const std::optional<std::string>& answer,
                        const std::vector<std::string>& gold_answers, DownstreamKind kind, std::size_t k);

} // namespace re3val
