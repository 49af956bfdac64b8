#include "re3val/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_set>

#include "re3val/error.hpp"
#include "re3val/text.hpp"

namespace re3val {

namespace {

// Rankings are deduplicated (first occurrence kept) before truncation.
std::size_t hits_in_top(const std::vector<std::string>& retrieved, const std::unordered_set<std::string>& gold,
                        std::size_t depth) {
    std::unordered_set<std::string> seen;
    std::size_t hits = 0;
    for (const auto& t : retrieved) {
        if (seen.size() >= depth) break;
        if (!seen.insert(t).second) continue;
        if (gold.count(t)) ++hits;
    }
    return hits;
}

std::vector<std::string> answer_tokens(std::string_view text) { return split_words(normalize_answer(text)); }

double f1_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int common = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++common;
        }
    }
    if (common == 0) return 0.0;
    const double p = static_cast<double>(common) / static_cast<double>(pred.size());
    const double r = static_cast<double>(common) / static_cast<double>(gold.size());
    return 2 * p * r / (p + r);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t up = row[j];
            row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
            diag = up;
        }
    }
    return row[b.size()];
}

double rouge_l_tokens(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    const auto lcs = static_cast<double>(lcs_length(pred, gold));
    if (lcs == 0) return 0.0;
    const double p = lcs / static_cast<double>(pred.size());
    const double r = lcs / static_cast<double>(gold.size());
    return 2 * p * r / (p + r);
}

template <typename Tokens, typename F>
double max_over_golds(std::string_view pred, const std::vector<std::string>& golds, Tokens tokens, F score) {
    double best = 0.0;
    const auto p = tokens(pred);
    for (const auto& g : golds) best = std::max(best, score(p, tokens(g)));
    return best;
}

double safe_ratio(std::uint64_t num, std::uint64_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

double r_precision(const std::vector<std::string>& retrieved, const std::vector<std::string>& gold) {
    std::unordered_set<std::string> g(gold.begin(), gold.end());
    if (g.empty()) throw UndefinedMetricError("R-Precision is undefined without gold titles");
    return static_cast<double>(hits_in_top(retrieved, g, g.size())) / static_cast<double>(g.size());
}

double recall_at_k(const std::vector<std::string>& retrieved, const std::vector<std::string>& gold, std::size_t k) {
    std::unordered_set<std::string> g(gold.begin(), gold.end());
    if (g.empty()) throw UndefinedMetricError("Recall@k is undefined without gold titles");
    if (k == 0) throw ValidationError("Recall@k needs k >= 1");
    return static_cast<double>(hits_in_top(retrieved, g, k)) / static_cast<double>(g.size());
}

std::string normalize_answer(std::string_view text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (char c : text) {
        if (is_ascii_punct(c)) continue;
        auto u = static_cast<unsigned char>(c);
        lowered.push_back(u < 128 ? static_cast<char>(std::tolower(u)) : c);
    }
    std::vector<std::string> kept;
    for (auto& w : split_words(lowered))
        if (w != "a" && w != "an" && w != "the") kept.push_back(std::move(w));
    return join_words(kept);
}

double exact_match(std::string_view pred, const std::vector<std::string>& golds) {
    const auto p = normalize_answer(pred);
    for (const auto& g : golds)
        if (normalize_answer(g) == p) return 1.0;
    return 0.0;
}

double token_f1(std::string_view pred, const std::vector<std::string>& golds) {
    return max_over_golds(pred, golds, answer_tokens, f1_tokens);
}

double rouge_l(std::string_view pred, const std::vector<std::string>& golds) {
    return max_over_golds(pred, golds, normalize_words, rouge_l_tokens);
}

double accuracy_label(std::string_view pred, std::string_view gold) {
    return normalize_answer(pred) == normalize_answer(gold) ? 1.0 : 0.0;
}

ClassifierMetrics classifier_metrics(const ConfusionCounts& c) {
    ClassifierMetrics m;
    m.precision = safe_ratio(c.tp, c.tp + c.fp, m.precision_undefined);
    m.recall = safe_ratio(c.tp, c.tp + c.fn, m.recall_undefined);
    m.f1_undefined = m.precision + m.recall == 0.0;
    m.f1 = m.f1_undefined ? 0.0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    m.accuracy = safe_ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn, m.accuracy_undefined);
    return m;
}

double kilt_gate(double rp, double downstream) { return rp == 1.0 ? downstream : 0.0; }

double kilt_score(const std::vector<GatedPair>& per_query) {
    if (per_query.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& q : per_query) sum += kilt_gate(q.r_precision, q.downstream);
    return sum / static_cast<double>(per_query.size());
}

QueryScores score_query(const std::string& id, const std::vector<std::string>& retrieved,
                        const std::vector<std::string>& gold_titles, const std::optional<std::string>& answer,
                        const std::vector<std::string>& gold_answers, DownstreamKind kind, std::size_t k) {
    QueryScores s;
    s.id = id;
    s.r_precision = r_precision(retrieved, gold_titles);
    s.recall_at_k = recall_at_k(retrieved, gold_titles, k);
    if (!answer || gold_answers.empty()) return s;
    auto gate = [&](double v) { return kilt_gate(s.r_precision, v); };
    switch (kind) {
    case DownstreamKind::QA:
        s.em = exact_match(*answer, gold_answers);
        s.f1 = token_f1(*answer, gold_answers);
        s.kilt_em = gate(*s.em);
        s.kilt_f1 = gate(*s.f1);
        break;
    case DownstreamKind::Dialogue:
        s.rouge_l = rouge_l(*answer, gold_answers);
        s.f1 = token_f1(*answer, gold_answers);
        s.kilt_rouge_l = gate(*s.rouge_l);
        s.kilt_f1 = gate(*s.f1);
        break;
    case DownstreamKind::FactCheck: {
        double acc = 0.0;
        for (const auto& g : gold_answers) acc = std::max(acc, accuracy_label(*answer, g));
        s.accuracy = acc;
        s.kilt_accuracy = gate(acc);
        break;
    }
    }
    return s;
}

EvalReport::Aggregate EvalReport::aggregate() const {
    Aggregate a;
    if (queries.empty()) return a;
    const double n = static_cast<double>(queries.size());
    auto mean_opt = [&](auto member) -> std::optional<double> {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& q : queries)
            if (const auto& v = q.*member) {
                sum += *v;
                ++count;
            }
        if (count == 0) return std::nullopt;
        return sum / static_cast<double>(count);
    };
    for (const auto& q : queries) {
        a.r_precision += q.r_precision;
        a.recall_at_k += q.recall_at_k;
    }
    a.r_precision /= n;
    a.recall_at_k /= n;
    a.em = mean_opt(&QueryScores::em);
    a.f1 = mean_opt(&QueryScores::f1);
    a.rouge_l = mean_opt(&QueryScores::rouge_l);
    a.accuracy = mean_opt(&QueryScores::accuracy);
    a.kilt_em = mean_opt(&QueryScores::kilt_em);
    a.kilt_f1 = mean_opt(&QueryScores::kilt_f1);
    a.kilt_rouge_l = mean_opt(&QueryScores::kilt_rouge_l);
    a.kilt_accuracy = mean_opt(&QueryScores::kilt_accuracy);
    return a;
}

} // namespace re3val
