#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "re3val/jsonl.hpp"
#include "re3val/pipeline.hpp"
#include "re3val/synthetic.hpp"

namespace testing {

/// Writes the default synthetic corpus and queries into `dir` and returns a
/// config whose outputs go to `dir/out`.
inline re3val::PipelineConfig synthetic_config(const std::filesystem::path& dir, std::uint64_t seed = 13,
                                               const re3val::SyntheticSpec& spec = {}) {
    const auto data = re3val::make_synthetic(spec);
    re3val::write_file_atomic(dir / "knowledge.jsonl", re3val::knowledge_jsonl(data.records));
    re3val::write_file_atomic(dir / "queries.jsonl", re3val::queries_jsonl(data.queries));
    re3val::PipelineConfig config;
    config.corpus = dir / "knowledge.jsonl";
    config.train_queries = dir / "queries.jsonl";
    config.out_dir = dir / "out";
    config.seed = seed;
    return config;
}

/// File name to contents for every regular file directly under `dir`.
inline std::map<std::string, std::string> snapshot_dir(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file()) out[e.path().filename().string()] = re3val::read_file(e.path());
    return out;
}

} // namespace testing
