#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "re3val/decoder.hpp"
#include "re3val/policy.hpp"
#include "re3val/reinforce.hpp"

namespace re3val {

enum class Stage {
    Chunk,
    BuildTrie,
    BuildIndex,
    Pretrain,
    ReinforceZero,
    FewShot,
    ReinforceFew,
    MakeRerankData,
    RerankTitles,
    RetrieveContexts,
    RerankContexts,
    BuildReaderInputs,
    Evaluate,
};

/// Stages in a valid execution order.
const std::vector<Stage>& all_stages();
std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& stage_dependencies(Stage stage);

/// Kahn's algorithm; throws ValidationError naming a stage on a cycle.
void check_acyclic(const std::map<Stage, std::vector<Stage>>& graph);
void validate_stage_graph();

/// Everything a stage needs. Loaded from a flat `key = value` file where
/// `include = other.cfg` pulls in another file first (relative paths
/// resolve against the including file).
struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path train_queries;
    std::filesystem::path eval_queries;
    std::filesystem::path generated_questions;
    std::filesystem::path out_dir = "out";
    TaskKind task = TaskKind::QA;
    std::uint64_t seed = 13;

    std::size_t embed_dim = 16;
    std::size_t hidden_dim = 32;
    std::size_t window = 4;

    DecodeConfig rl_decode{5, 5, 64};
    DecodeConfig eval_decode{10, 5, 64};
    DecodeConfig test_decode{5, 5, 64};

    SupervisedSchedule pretrain{50, 2.0, 16, 0};
    SupervisedSchedule fewshot{20, 0.5, 8, 0};
    SupervisedSchedule rerank{10, 0.3, 8, 0};
    ReinforceSchedule rl_zero{20, 0.1, RolloutMode::Beam, 0};
    ReinforceSchedule rl_few{5, 0.1, RolloutMode::Beam, 0};

    std::size_t candidate_titles = 10;
    std::size_t provider_contexts = 5;
    std::size_t k_titles = 5;
    std::size_t k_contexts = 5;
    std::size_t hard_negatives = 128;

    /// Inputs of the standalone `decode` and `evaluate` commands.
    std::filesystem::path params;
    std::filesystem::path queries;
    std::filesystem::path predictions;
    std::filesystem::path output;

    void set(const std::string& key, const std::string& value);
    std::filesystem::path artifact(std::string_view name) const { return out_dir / name; }
};

PipelineConfig load_config(const std::filesystem::path& path);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);

struct StageSummary {
    std::string name;
    std::vector<std::pair<std::string, std::string>> fields;
    double seconds = 0.0;

    /// "stage=<name> key=value ... seconds=<s>"
    std::string line() const;
};

/// Runs one stage. Inputs from earlier stages must already exist in
/// `out_dir`; outputs are written atomically and are byte-identical for
/// identical inputs and seed.
StageSummary run_stage(const PipelineConfig& config, Stage stage);

/// Runs every stage in order.
std::vector<StageSummary> run_pipeline(const PipelineConfig& config);

/// Decodes `config.queries` with `config.params` into decode JSONL at `config.output`.
StageSummary run_decode(const PipelineConfig& config);

} // namespace re3val
