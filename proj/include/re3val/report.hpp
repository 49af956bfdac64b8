#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "re3val/corpus.hpp"
#include "re3val/metrics.hpp"

namespace re3val {

struct Prediction {
    std::string id;
    std::vector<std::string> titles;
    std::optional<std::string> answer;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);

DownstreamKind downstream_kind(TaskKind kind);

/// Scores every query that has gold titles and a prediction, in query order.
/// Queries lacking either are counted in `skipped`.
EvalReport evaluate_predictions(const std::vector<QueryRecord>& queries, const std::vector<Prediction>& predictions,
                                std::size_t k, std::size_t* skipped = nullptr);

enum class ReportFormat { Json, Table };

/// Pretty JSON with aggregate and per-query scores. A non-null `meta` is
/// stored under "__meta__".
std::string report_json(const EvalReport& report, const nlohmann::json& meta = nullptr);

/// Fixed-width table: id, R-P, R@k, EM, F1, KILT-EM, KILT-F1; one row per query.
std::string report_table(const EvalReport& report);

/// Tables get a "# {meta}" first line when `meta` is non-null.
void emit_report(const EvalReport& report, ReportFormat format, const std::filesystem::path& path,
                 const nlohmann::json& meta = nullptr);

} // namespace re3val
