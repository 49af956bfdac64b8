#include "re3val/report.hpp"

#include <cstdio>
#include <unordered_map>

#include <json.hpp>

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"

namespace re3val {

using nlohmann::json;

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    for (const auto& obj : read_jsonl(path)) {
        try {
            Prediction p;
            p.id = obj.at("id").get<std::string>();
            p.titles = obj.at("titles").get<std::vector<std::string>>();
            if (auto it = obj.find("answer"); it != obj.end() && it->is_string()) p.answer = it->get<std::string>();
            out.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ValidationError(path.string() + ": bad prediction record: " + e.what());
        }
    }
    return out;
}

DownstreamKind downstream_kind(TaskKind kind) {
    switch (kind) {
    case TaskKind::QA: return DownstreamKind::QA;
    case TaskKind::FactCheck: return DownstreamKind::FactCheck;
    case TaskKind::Dialogue: return DownstreamKind::Dialogue;
    }
    return DownstreamKind::QA;
}

EvalReport evaluate_predictions(const std::vector<QueryRecord>& queries, const std::vector<Prediction>& predictions,
                                std::size_t k, std::size_t* skipped) {
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);
    EvalReport report;
    report.k = k;
    std::size_t missing = 0;
    for (const auto& q : queries) {
        auto it = by_id.find(q.id);
        if (q.gold_titles.empty() || it == by_id.end()) {
            ++missing;
            continue;
        }
        report.queries.push_back(score_query(q.id, it->second->titles, q.gold_titles, it->second->answer,
                                             q.gold_answers, downstream_kind(q.task_kind), k));
    }
    if (skipped) *skipped = missing;
    return report;
}

namespace {

void put_opt(json& obj, const char* key, const std::optional<double>& v) {
    if (v) obj[key] = *v;
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

std::string row(const std::string& id, const std::vector<std::string>& cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-24s", id.c_str());
    std::string out = buf;
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof buf, " %8s", c.c_str());
        out += buf;
    }
    out += "\n";
    return out;
}

} // namespace

std::string report_json(const EvalReport& report, const json& meta) {
    json queries = json::array();
    for (const auto& q : report.queries) {
        json obj{{"id", q.id}, {"r_precision", q.r_precision}, {"recall_at_k", q.recall_at_k}};
        put_opt(obj, "em", q.em);
        put_opt(obj, "f1", q.f1);
        put_opt(obj, "rouge_l", q.rouge_l);
        put_opt(obj, "accuracy", q.accuracy);
        put_opt(obj, "kilt_em", q.kilt_em);
        put_opt(obj, "kilt_f1", q.kilt_f1);
        put_opt(obj, "kilt_rouge_l", q.kilt_rouge_l);
        put_opt(obj, "kilt_accuracy", q.kilt_accuracy);
        queries.push_back(std::move(obj));
    }
    const auto a = report.aggregate();
    json agg{{"queries", report.queries.size()}, {"r_precision", a.r_precision}, {"recall_at_k", a.recall_at_k}};
    put_opt(agg, "em", a.em);
    put_opt(agg, "f1", a.f1);
    put_opt(agg, "rouge_l", a.rouge_l);
    put_opt(agg, "accuracy", a.accuracy);
    put_opt(agg, "kilt_em", a.kilt_em);
    put_opt(agg, "kilt_f1", a.kilt_f1);
    put_opt(agg, "kilt_rouge_l", a.kilt_rouge_l);
    put_opt(agg, "kilt_accuracy", a.kilt_accuracy);
    json out{{"k", report.k}, {"aggregate", agg}, {"queries", queries}};
    if (!meta.is_null()) out[kMetaKey] = meta;
    return out.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
    std::string out = row("id", {"R-P", "R@" + std::to_string(report.k), "EM", "F1", "KILT-EM", "KILT-F1"});
    for (const auto& q : report.queries)
        out += row(q.id, {cell(q.r_precision), cell(q.recall_at_k), cell(q.em), cell(q.f1), cell(q.kilt_em),
                          cell(q.kilt_f1)});
    return out;
}

void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path,
                 const json& meta) {
    if (format == ReportFormat::Json) {
        write_file_atomic(path, report_json(report, meta));
        return;
    }
    write_file_atomic(path, meta.is_null() ? report_table(report) : "# " + meta.dump() + "\n" + report_table(report));
}

} // namespace re3val
