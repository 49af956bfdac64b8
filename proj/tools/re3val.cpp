#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"
#include "re3val/pipeline.hpp"
#include "re3val/synthetic.hpp"

using namespace re3val;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string stage;
    std::optional<std::size_t> k_titles;
    std::optional<std::size_t> k_contexts;
    std::string task;
    std::string corpus;
    std::string train_queries;
    std::string eval_queries;
    std::string params;
    std::string queries;
    std::string predictions;
    std::string output;
};

PipelineConfig resolve(const Globals& g) {
    PipelineConfig c;
    if (!g.config.empty()) apply_config_file(c, g.config);
    if (g.seed) c.seed = *g.seed;
    if (!g.out.empty()) c.out_dir = g.out;
    if (g.k_titles) c.k_titles = *g.k_titles;
    if (g.k_contexts) c.k_contexts = *g.k_contexts;
    if (!g.task.empty()) c.task = parse_task_kind(g.task);
    if (!g.corpus.empty()) c.corpus = g.corpus;
    if (!g.train_queries.empty()) c.train_queries = g.train_queries;
    if (!g.eval_queries.empty()) c.eval_queries = g.eval_queries;
    if (!g.params.empty()) c.params = g.params;
    if (!g.queries.empty()) c.queries = g.queries;
    if (!g.predictions.empty()) c.predictions = g.predictions;
    if (!g.output.empty()) c.output = g.output;
    return c;
}

void run_one(const PipelineConfig& c, Stage s) { std::cout << run_stage(c, s).line() << '\n'; }

Stage pick(const std::string& given, std::initializer_list<Stage> allowed, Stage fallback) {
    if (given.empty()) return fallback;
    Stage s = parse_stage(given);
    for (Stage a : allowed)
        if (a == s) return s;
    throw ValidationError("stage '" + given + "' is not valid for this command");
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    if (dynamic_cast<const DependencyError*>(&e)) return 3;
    return 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained title retrieval, reranking and evaluation pipeline"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Config file (key = value)")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed recorded in every artifact");
    app.add_option("--out", g.out, "Artifact directory");
    app.add_option("--stage", g.stage, "Stage name");
    app.add_option("--k-titles", g.k_titles, "Titles kept per query (default 5)");
    app.add_option("--k-contexts", g.k_contexts, "Contexts kept per query (default 5)");
    app.add_option("--task", g.task, "qa, fact_check or dialogue");
    app.add_option("--corpus", g.corpus, "Knowledge source JSONL");
    app.add_option("--train-queries", g.train_queries, "Training queries JSONL");
    app.add_option("--eval-queries", g.eval_queries, "Evaluation queries JSONL");
    app.fallthrough();

    std::function<void(const PipelineConfig&)> action;
    auto simple = [&](const char* name, const char* help, Stage stage) {
        app.add_subcommand(name, help)->callback([&action, stage] {
            action = [stage](const PipelineConfig& c) { run_one(c, stage); };
        });
    };
    simple("chunk", "Split the knowledge source into 100-word chunks", Stage::Chunk);
    simple("build-trie", "Build the vocabulary and title prefix tree", Stage::BuildTrie);
    simple("build-index", "Build BM25 title and chunk indexes", Stage::BuildIndex);
    simple("make-rerank-data", "Build title-rerank and context-pair training data", Stage::MakeRerankData);
    simple("rerank-titles", "Train the title reranker and rerank evaluation titles", Stage::RerankTitles);
    simple("retrieve-contexts", "Fetch contexts for reranked titles", Stage::RetrieveContexts);
    simple("rerank-contexts", "Rerank retrieved contexts", Stage::RerankContexts);
    simple("reader-inputs", "Assemble reader inputs", Stage::BuildReaderInputs);

    app.add_subcommand("train", "Supervised training (--stage pretrain|few-shot)")->callback([&] {
        Stage s = pick(g.stage, {Stage::Pretrain, Stage::FewShot}, Stage::Pretrain);
        action = [s](const PipelineConfig& c) { run_one(c, s); };
    });
    app.add_subcommand("train-rl", "REINFORCE training (--stage reinforce-zero|reinforce-few)")->callback([&] {
        Stage s = pick(g.stage, {Stage::ReinforceZero, Stage::ReinforceFew}, Stage::ReinforceZero);
        action = [s](const PipelineConfig& c) { run_one(c, s); };
    });

    auto* decode = app.add_subcommand("decode", "Constrained beam search over queries");
    decode->add_option("--params", g.params, "Policy snapshot")->required();
    decode->add_option("--queries", g.queries, "Queries JSONL")->required();
    decode->add_option("--output", g.output, "Output JSONL")->required();
    decode->callback([&] { action = [](const PipelineConfig& c) { std::cout << run_decode(c).line() << '\n'; }; });

    auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold queries");
    evaluate->add_option("--predictions", g.predictions, "Predictions JSONL ({id, titles, answer?})");
    evaluate->callback([&] { action = [](const PipelineConfig& c) { run_one(c, Stage::Evaluate); }; });

    app.add_subcommand("pipeline", "Run every stage, or only --stage")->callback([&] {
        action = [&g](const PipelineConfig& c) {
            if (!g.stage.empty()) return run_one(c, parse_stage(g.stage));
            for (Stage s : all_stages()) run_one(c, s);
        };
    });

    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus and query set");
    SyntheticSpec spec;
    std::string synth_dir = "synthetic";
    synth->add_option("--dir", synth_dir, "Output directory");
    synth->add_option("--titles", spec.num_titles);
    synth->add_option("--queries", spec.num_queries);
    synth->callback([&] {
        action = [&](const PipelineConfig& c) {
            spec.seed = c.seed;
            const auto data = make_synthetic(spec);
            std::filesystem::create_directories(synth_dir);
            write_file_atomic(std::filesystem::path(synth_dir) / "knowledge.jsonl", knowledge_jsonl(data.records));
            write_file_atomic(std::filesystem::path(synth_dir) / "queries.jsonl", queries_jsonl(data.queries));
            std::cout << "stage=synth records=" << data.records.size() << " queries=" << data.queries.size() << '\n';
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    try {
        validate_stage_graph();
        action(resolve(g));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
