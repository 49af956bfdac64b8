#include "re3val/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "re3val/bm25.hpp"
#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"
#include "re3val/metrics.hpp"
#include "re3val/mutual_information.hpp"
#include "re3val/report.hpp"
#include "re3val/rerank.hpp"
#include "re3val/text.hpp"

namespace re3val {

using nlohmann::json;

namespace {

struct StageInfo {
    Stage stage;
    std::string_view name;
    std::vector<Stage> deps;
};

const std::vector<StageInfo>& stage_table() {
    static const std::vector<StageInfo> table{
        {Stage::Chunk, "chunk", {}},
        {Stage::BuildTrie, "build-trie", {Stage::Chunk}},
        {Stage::BuildIndex, "build-index", {Stage::Chunk}},
        {Stage::Pretrain, "pretrain", {Stage::BuildTrie}},
        {Stage::ReinforceZero, "reinforce-zero", {Stage::Pretrain}},
        {Stage::FewShot, "few-shot", {Stage::ReinforceZero}},
        {Stage::ReinforceFew, "reinforce-few", {Stage::FewShot}},
        {Stage::MakeRerankData, "make-rerank-data", {Stage::Pretrain, Stage::ReinforceFew, Stage::BuildIndex}},
        {Stage::RerankTitles, "rerank-titles", {Stage::MakeRerankData, Stage::BuildIndex}},
        {Stage::RetrieveContexts, "retrieve-contexts", {Stage::RerankTitles, Stage::BuildIndex}},
        {Stage::RerankContexts, "rerank-contexts", {Stage::RetrieveContexts}},
        {Stage::BuildReaderInputs, "reader-inputs", {Stage::RerankContexts}},
        {Stage::Evaluate, "evaluate", {Stage::RerankContexts}},
    };
    return table;
}

const StageInfo& info(Stage stage) {
    for (const auto& s : stage_table())
        if (s.stage == stage) return s;
    throw ValidationError("unknown stage");
}

// Artifact file names, and the stage that writes each.
namespace files {
constexpr const char* chunks = "chunks.jsonl";
constexpr const char* vocab = "vocab.txt";
constexpr const char* trie = "trie.bin";
constexpr const char* title_index = "title_index.bin";
constexpr const char* chunk_index = "chunk_index.bin";
constexpr const char* policy_zero = "policy_zero.bin";
constexpr const char* policy_zero_rl = "policy_zero_rl.bin";
constexpr const char* policy_few = "policy_few.bin";
constexpr const char* policy_few_rl = "policy_few_rl.bin";
constexpr const char* policy_rerank = "policy_rerank.bin";
constexpr const char* rerank_train = "rerank_train.jsonl";
constexpr const char* context_pairs = "context_pairs.jsonl";
constexpr const char* reranked_titles = "reranked_titles.jsonl";
constexpr const char* contexts = "contexts.jsonl";
constexpr const char* reranked_contexts = "reranked_contexts.jsonl";
constexpr const char* reader_inputs = "reader_inputs.jsonl";
constexpr const char* predictions = "predictions.jsonl";
constexpr const char* report_json = "eval_report.json";
constexpr const char* report_table = "eval_report.txt";
} // namespace files

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::size_t to_size(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        auto v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("config key '" + key + "' expects a number, got '" + value + "'");
    }
}

/// Everything stages share once the corpus-side artifacts exist.
struct Workspace {
    const PipelineConfig& config;
    Stage stage;

    json meta() const { return json{{"seed", config.seed}, {"stage", stage_name(stage)}}; }
    std::uint64_t stage_seed() const { return mix_seed(config.seed, static_cast<std::uint64_t>(stage)); }

    std::filesystem::path need(const char* name, Stage producer) const {
        auto p = config.artifact(name);
        if (!std::filesystem::exists(p))
            throw DependencyError("stage '" + std::string(stage_name(stage)) + "' needs " + p.string() +
                                  " from stage '" + std::string(stage_name(producer)) + "'; run that stage first");
        return p;
    }
    static std::filesystem::path need_input(const std::filesystem::path& p, const char* key) {
        if (p.empty()) throw ValidationError("config key '" + std::string(key) + "' is not set");
        if (!std::filesystem::exists(p)) throw ValidationError(std::string(key) + " not found: " + p.string());
        return p;
    }

    Vocabulary vocab() const { return Vocabulary::load(need(files::vocab, Stage::BuildTrie)); }
    TitleTrie trie() const { return TitleTrie::load(need(files::trie, Stage::BuildTrie)); }
    InvertedIndex title_index() const { return InvertedIndex::load(need(files::title_index, Stage::BuildIndex)); }
    InvertedIndex chunk_index() const { return InvertedIndex::load(need(files::chunk_index, Stage::BuildIndex)); }
    PolicyParams policy(const char* name, Stage producer) const { return PolicyParams::load(need(name, producer)); }

    std::vector<Chunk> chunks() const {
        std::vector<Chunk> out;
        for (const auto& obj : read_jsonl(need(files::chunks, Stage::Chunk)))
            out.push_back({obj.at("title").get<std::string>(), obj.at("chunk_index").get<std::size_t>(),
                           obj.at("text").get<std::string>()});
        return out;
    }
    std::vector<QueryRecord> train_queries() const {
        return load_queries(need_input(config.train_queries, "train_queries"), config.task);
    }
    std::vector<QueryRecord> eval_queries() const {
        const auto& p = config.eval_queries.empty() ? config.train_queries : config.eval_queries;
        return load_queries(need_input(p, "eval_queries"), config.task);
    }
};

std::vector<TokenId> encode_query(std::string_view prompt, std::string_view text, const Vocabulary& vocab) {
    std::string full(prompt);
    full += text;
    return tokenize(full, vocab);
}

/// Titles that survive tokenization into the trie.
std::vector<std::vector<TokenId>> trie_titles(const std::vector<std::string>& titles, const TitleTrie& trie,
                                              const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> out;
    for (const auto& t : titles) {
        auto ids = tokenize(t, vocab);
        if (trie.contains_title(ids)) out.push_back(std::move(ids));
    }
    return out;
}

std::vector<SupervisedExample> labeled_examples(const std::vector<QueryRecord>& queries, const TitleTrie& trie,
                                                const Vocabulary& vocab, std::size_t max_titles) {
    std::vector<SupervisedExample> out;
    for (const auto& q : queries) {
        auto titles = trie_titles(q.gold_titles, trie, vocab);
        if (titles.empty()) continue;
        out.push_back({encode_query(kRankPrompt, q.input, vocab), target_steps_from_tokens(trie, titles, max_titles)});
    }
    return out;
}

std::vector<TrainingQuery> rl_queries(const std::vector<QueryRecord>& queries, const Vocabulary& vocab) {
    std::vector<TrainingQuery> out;
    for (const auto& q : queries)
        if (!q.gold_titles.empty()) out.push_back({q.id, encode_query(kRankPrompt, q.input, vocab), q.gold_titles});
    return out;
}

PolicyShape policy_shape(const PipelineConfig& c, const Vocabulary& vocab) {
    return PolicyShape{vocab.size(), c.embed_dim, c.hidden_dim, c.window};
}

std::string supervised_trace(const std::vector<double>& losses, const json& meta) {
    std::string out = "# " + meta.dump() + "\nepoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, losses[i]);
        out += buf;
    }
    return out;
}

json beams_json(const std::vector<Hypothesis>& hyps) {
    json beams = json::array();
    for (const auto& h : hyps) beams.push_back({{"titles", h.titles}, {"logprob", h.log_prob}});
    return beams;
}

json chunk_json(const Chunk& c) { return {{"title", c.title}, {"chunk_index", c.chunk_index}, {"text", c.text}}; }

Chunk chunk_from_json(const json& j) {
    return {j.at("title").get<std::string>(), j.at("chunk_index").get<std::size_t>(), j.at("text").get<std::string>()};
}

std::map<std::string, json> by_id(const std::vector<json>& rows) {
    std::map<std::string, json> out;
    for (const auto& r : rows) out.emplace(r.at("id").get<std::string>(), r);
    return out;
}

// ---------------------------------------------------------------------------

StageSummary stage_chunk(const Workspace& ws) {
    const auto records = load_knowledge_source(Workspace::need_input(ws.config.corpus, "corpus"));
    JsonlBuffer out(ws.meta());
    for (const auto& rec : records)
        for (const auto& c : chunk_passage(rec)) out.add(chunk_json(c));
    out.commit(ws.config.artifact(files::chunks));
    return {"", {{"records", std::to_string(records.size())}, {"chunks", std::to_string(out.count())}}, 0};
}

StageSummary stage_build_trie(const Workspace& ws) {
    const auto records = load_knowledge_source(Workspace::need_input(ws.config.corpus, "corpus"));
    const auto chunks = ws.chunks();
    std::vector<std::string> texts{std::string(kRankPrompt), std::string(kRerankPrompt), "[SEP]"};
    std::vector<std::string> titles;
    for (const auto& r : records) {
        texts.push_back(r.title);
        titles.push_back(r.title);
    }
    for (const auto& c : chunks) texts.push_back(c.text);
    if (!ws.config.train_queries.empty())
        for (const auto& q : ws.train_queries()) texts.push_back(q.input);
    const auto vocab = Vocabulary::build(texts);
    const auto trie = TitleTrie::build(titles, vocab);
    vocab.save(ws.config.artifact(files::vocab), ws.meta().dump());
    trie.save(ws.config.artifact(files::trie), ws.config.seed);
    return {"",
            {{"vocab", std::to_string(vocab.size())},
             {"titles", std::to_string(trie.title_count())},
             {"nodes", std::to_string(trie.node_count())}},
            0};
}

StageSummary stage_build_index(const Workspace& ws) {
    const auto records = load_knowledge_source(Workspace::need_input(ws.config.corpus, "corpus"));
    std::vector<std::string> titles;
    for (const auto& r : records) titles.push_back(r.title);
    const auto chunks = ws.chunks();
    const auto title_index = InvertedIndex::build_titles(titles);
    const auto chunk_index = InvertedIndex::build_chunks(chunks);
    title_index.save(ws.config.artifact(files::title_index), ws.config.seed);
    chunk_index.save(ws.config.artifact(files::chunk_index), ws.config.seed);
    return {"",
            {{"title_docs", std::to_string(title_index.doc_count())},
             {"chunk_docs", std::to_string(chunk_index.doc_count())},
             {"terms", std::to_string(chunk_index.terms().size())}},
            0};
}

StageSummary stage_pretrain(const Workspace& ws) {
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto& c = ws.config;
    std::vector<SupervisedExample> examples;
    for (const auto& chunk : ws.chunks()) {
        auto title = tokenize(chunk.title, vocab);
        if (!trie.contains_title(title)) continue;
        examples.push_back({encode_query(kRankPrompt, chunk.text, vocab),
                            target_steps_from_tokens(trie, {title}, c.rl_decode.max_titles_per_beam)});
    }
    std::size_t generated = 0, kept = 0;
    if (!c.generated_questions.empty()) {
        for (const auto& obj : read_jsonl(Workspace::need_input(c.generated_questions, "generated_questions"))) {
            ++generated;
            const auto question = obj.at("question").get<std::string>();
            const auto tags = obj.value("entities", std::vector<std::string>{});
            if (!filter_generated_question(question, {tags.begin(), tags.end()})) continue;
            auto title = tokenize(obj.at("title").get<std::string>(), vocab);
            if (!trie.contains_title(title)) continue;
            examples.push_back({encode_query(kRankPrompt, question, vocab),
                                target_steps_from_tokens(trie, {title}, c.rl_decode.max_titles_per_beam)});
            ++kept;
        }
    }
    auto schedule = c.pretrain;
    schedule.seed = ws.stage_seed();
    const auto init = PolicyParams::random(policy_shape(c, vocab), mix_seed(c.seed, 0xC0FFEE));
    const auto result = train_supervised(init, examples, schedule);
    result.params.save(c.artifact(files::policy_zero), c.seed);
    write_file_atomic(c.artifact("pretrain_trace.csv"), supervised_trace(result.epoch_loss, ws.meta()));
    return {"",
            {{"examples", std::to_string(examples.size())},
             {"generated", std::to_string(generated)},
             {"generated_kept", std::to_string(kept)},
             {"final_loss", result.epoch_loss.empty() ? "-" : fmt_double(result.epoch_loss.back())}},
            0};
}

StageSummary stage_reinforce(const Workspace& ws, const char* input, Stage producer, const char* output,
                             const ReinforceSchedule& base, const char* trace_name) {
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto params = ws.policy(input, producer);
    const auto queries = rl_queries(ws.train_queries(), vocab);
    auto schedule = base;
    schedule.seed = ws.stage_seed();
    const auto result = train_reinforce(params, queries, trie, ws.config.rl_decode, schedule);
    result.params.save(ws.config.artifact(output), ws.config.seed);
    write_file_atomic(ws.config.artifact(trace_name), "# " + ws.meta().dump() + "\n" + trace_csv(result.trace));
    return {"",
            {{"queries", std::to_string(queries.size())},
             {"epochs", std::to_string(result.trace.size())},
             {"first_reward", result.trace.empty() ? "-" : fmt_double(result.trace.front().mean_reward)},
             {"last_reward", result.trace.empty() ? "-" : fmt_double(result.trace.back().mean_reward)}},
            0};
}

StageSummary stage_fewshot(const Workspace& ws) {
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto params = ws.policy(files::policy_zero_rl, Stage::ReinforceZero);
    const auto examples = labeled_examples(ws.train_queries(), trie, vocab, ws.config.rl_decode.max_titles_per_beam);
    auto schedule = ws.config.fewshot;
    schedule.seed = ws.stage_seed();
    const auto result = train_supervised(params, examples, schedule);
    result.params.save(ws.config.artifact(files::policy_few), ws.config.seed);
    write_file_atomic(ws.config.artifact("fewshot_trace.csv"), supervised_trace(result.epoch_loss, ws.meta()));
    return {"",
            {{"examples", std::to_string(examples.size())},
             {"final_loss", result.epoch_loss.empty() ? "-" : fmt_double(result.epoch_loss.back())}},
            0};
}

std::set<ChunkKey> gold_chunk_keys(const QueryRecord& q, const ChunkStore& store) {
    std::set<ChunkKey> out;
    std::vector<std::string> answers;
    for (const auto& a : q.gold_answers)
        if (auto n = normalize_answer(a); !n.empty()) answers.push_back(" " + n + " ");
    for (const auto& title : q.gold_titles) {
        const auto chunks = store.chunks_for(title);
        bool any = false;
        for (const auto& c : chunks) {
            const auto text = " " + normalize_answer(c.text) + " ";
            for (const auto& a : answers)
                if (text.find(a) != std::string::npos) {
                    out.insert({c.title, c.chunk_index});
                    any = true;
                    break;
                }
        }
        if (!any && !chunks.empty()) out.insert({chunks.front().title, chunks.front().chunk_index});
    }
    return out;
}

StageSummary stage_make_rerank_data(const Workspace& ws) {
    const auto& c = ws.config;
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto zero = ws.policy(files::policy_zero, Stage::Pretrain);
    const auto few = ws.policy(files::policy_few_rl, Stage::ReinforceFew);
    const auto chunk_index = ws.chunk_index();
    const ChunkStore store(ws.chunks());
    const Bm25ContextProvider provider(chunk_index);

    JsonlBuffer rerank_out(ws.meta()), pairs_out(ws.meta());
    std::vector<std::vector<double>> counts(2, std::vector<double>(2, 0.0));
    std::size_t example = 0, positives = 0, negatives = 0;
    for (const auto& q : ws.train_queries()) {
        if (q.gold_titles.empty()) continue;
        const auto ids = encode_query(kRankPrompt, q.input, vocab);
        const auto zero_titles =
            select_top_titles(constrained_beam_search(zero, ids, trie, c.eval_decode), c.candidate_titles);
        const auto few_titles =
            select_top_titles(constrained_beam_search(few, ids, trie, c.eval_decode), c.candidate_titles);
        const auto perturbed = perturb_training_titles(zero_titles, few_titles, example, mix_seed(ws.stage_seed(), example));
        const auto contexts = provider.contexts(q, c.provider_contexts);
        std::vector<std::string> context_texts;
        std::set<std::string> context_pages;
        for (const auto& ctx : contexts) {
            context_texts.push_back(ctx.text);
            context_pages.insert(ctx.title);
        }
        rerank_out.add({{"input", build_title_rerank_input(q.input, perturbed.titles, context_texts)},
                        {"target", rerank_target(q.gold_titles, perturbed.titles)},
                        {"mix", to_string(perturbed.mix)}});
        for (const auto& t : perturbed.titles) {
            const bool gold = std::find(q.gold_titles.begin(), q.gold_titles.end(), t) != q.gold_titles.end();
            counts[gold ? 1 : 0][context_pages.count(t) ? 1 : 0] += 1.0;
        }

        const auto gold_chunks = gold_chunk_keys(q, store);
        for (const auto& [title, index] : gold_chunks) {
            for (const auto& ch : store.chunks_for(title))
                if (ch.chunk_index == index) {
                    pairs_out.add({{"text", build_context_pair_input(q.input, ch.text, q.task_kind)}, {"label", 1}});
                    ++positives;
                }
        }
        const auto negs = mine_hard_negatives(q, gold_chunks, chunk_index, few_titles, c.hard_negatives);
        for (const auto* list : {&negs.labeled_titles, &negs.predicted_titles})
            for (const auto& ch : *list) {
                pairs_out.add({{"text", build_context_pair_input(q.input, ch.text, q.task_kind)}, {"label", 0}});
                ++negatives;
            }
        ++example;
    }
    rerank_out.commit(c.artifact(files::rerank_train));
    pairs_out.commit(c.artifact(files::context_pairs));
    std::string mi = "-";
    double mass = counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
    if (mass > 0) mi = fmt_double(mutual_information(JointDistribution::from_counts(counts)));
    return {"",
            {{"rerank_examples", std::to_string(rerank_out.count())},
             {"positives", std::to_string(positives)},
             {"hard_negatives", std::to_string(negatives)},
             {"title_context_mi_nats", mi}},
            0};
}

/// Trie over one query's candidate titles, sharing the global vocabulary.
std::optional<TitleTrie> candidate_trie(const std::vector<std::string>& titles, const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> tokens;
    std::vector<std::string> surfaces;
    for (const auto& t : titles) {
        auto ids = tokenize(t, vocab);
        if (ids.empty()) continue;
        tokens.push_back(std::move(ids));
        surfaces.push_back(t);
    }
    if (tokens.empty()) return std::nullopt;
    return TitleTrie::build_from_tokens(tokens, surfaces);
}

StageSummary stage_rerank_titles(const Workspace& ws) {
    const auto& c = ws.config;
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto few = ws.policy(files::policy_few_rl, Stage::ReinforceFew);
    const auto chunk_index = ws.chunk_index();
    const Bm25ContextProvider provider(chunk_index);

    std::vector<SupervisedExample> examples;
    for (const auto& row : read_jsonl(ws.need(files::rerank_train, Stage::MakeRerankData))) {
        const auto target = row.at("target").get<std::vector<std::string>>();
        auto local = candidate_trie(target, vocab);
        if (!local) continue;
        std::vector<std::vector<TokenId>> tokens;
        for (const auto& t : target)
            if (auto ids = tokenize(t, vocab); !ids.empty()) tokens.push_back(std::move(ids));
        examples.push_back({tokenize(row.at("input").get<std::string>(), vocab),
                            target_steps_from_tokens(*local, tokens, c.test_decode.max_titles_per_beam)});
    }
    auto schedule = c.rerank;
    schedule.seed = ws.stage_seed();
    const auto reranker = train_supervised(few, examples, schedule).params;
    reranker.save(c.artifact(files::policy_rerank), c.seed);

    JsonlBuffer out(ws.meta());
    std::size_t changed = 0;
    for (const auto& q : ws.eval_queries()) {
        const auto ids = encode_query(kRankPrompt, q.input, vocab);
        const auto candidates =
            select_top_titles(constrained_beam_search(few, ids, trie, c.eval_decode), c.candidate_titles);
        std::vector<std::string> context_texts;
        for (const auto& ctx : provider.contexts(q, c.provider_contexts)) context_texts.push_back(ctx.text);
        const auto input = build_title_rerank_input(q.input, candidates, context_texts);
        auto local = candidate_trie(candidates, vocab);
        std::vector<Hypothesis> hyps;
        if (local) hyps = constrained_beam_search(reranker, tokenize(input, vocab), *local, c.test_decode);
        const auto titles = select_top_titles(hyps, c.k_titles);
        std::vector<std::string> before(candidates.begin(),
                                        candidates.begin() + static_cast<std::ptrdiff_t>(std::min(candidates.size(), c.k_titles)));
        if (titles != before) ++changed;
        out.add({{"id", q.id}, {"titles", titles}, {"beams", beams_json(hyps)}});
    }
    out.commit(c.artifact(files::reranked_titles));
    return {"",
            {{"train_examples", std::to_string(examples.size())},
             {"queries", std::to_string(out.count())},
             {"reordered", std::to_string(changed)}},
            0};
}

StageSummary stage_retrieve_contexts(const Workspace& ws) {
    const auto title_index = ws.title_index();
    const ChunkStore store(ws.chunks());
    JsonlBuffer out(ws.meta());
    std::size_t contexts = 0, warnings = 0;
    for (const auto& row : read_jsonl(ws.need(files::reranked_titles, Stage::RerankTitles))) {
        auto titles = row.at("titles").get<std::vector<std::string>>();
        if (titles.size() > ws.config.k_titles) titles.resize(ws.config.k_titles);
        const auto got = retrieve_contexts_for_titles(titles, store, title_index);
        json list = json::array();
        for (const auto& rc : got.contexts) {
            auto j = chunk_json(rc.chunk);
            j["requested_title"] = rc.requested_title;
            list.push_back(std::move(j));
        }
        contexts += got.contexts.size();
        warnings += got.warnings.size();
        out.add({{"id", row.at("id")}, {"contexts", list}, {"warnings", got.warnings}});
    }
    out.commit(ws.config.artifact(files::contexts));
    return {"",
            {{"queries", std::to_string(out.count())},
             {"contexts", std::to_string(contexts)},
             {"warnings", std::to_string(warnings)}},
            0};
}

StageSummary stage_rerank_contexts(const Workspace& ws) {
    const auto chunk_index = ws.chunk_index();
    const Bm25OverlapScorer scorer(chunk_index);
    const auto rows = by_id(read_jsonl(ws.need(files::contexts, Stage::RetrieveContexts)));
    JsonlBuffer out(ws.meta());
    for (const auto& q : ws.eval_queries()) {
        auto it = rows.find(q.id);
        if (it == rows.end()) continue;
        std::vector<Chunk> chunks;
        for (const auto& j : it->second.at("contexts")) chunks.push_back(chunk_from_json(j));
        const auto ranked = rerank_contexts(scorer, q, chunks, ws.config.k_contexts);
        json list = json::array();
        for (const auto& sc : ranked.contexts) {
            auto j = chunk_json(sc.chunk);
            j["score"] = sc.score;
            list.push_back(std::move(j));
        }
        out.add({{"id", q.id}, {"contexts", list}, {"warnings", ranked.warnings}});
    }
    out.commit(ws.config.artifact(files::reranked_contexts));
    return {"", {{"queries", std::to_string(out.count())}}, 0};
}

StageSummary stage_reader_inputs(const Workspace& ws) {
    const auto rows = by_id(read_jsonl(ws.need(files::reranked_contexts, Stage::RerankContexts)));
    JsonlBuffer out(ws.meta());
    std::size_t inputs = 0;
    for (const auto& q : ws.eval_queries()) {
        auto it = rows.find(q.id);
        if (it == rows.end()) continue;
        json list = json::array();
        for (const auto& j : it->second.at("contexts")) {
            const auto ch = chunk_from_json(j);
            list.push_back(build_reader_input(q.input, ch.title, ch.text, q.task_kind));
        }
        inputs += list.size();
        out.add({{"id", q.id}, {"inputs", list}});
    }
    out.commit(ws.config.artifact(files::reader_inputs));
    return {"", {{"queries", std::to_string(out.count())}, {"inputs", std::to_string(inputs)}}, 0};
}

StageSummary stage_evaluate(const Workspace& ws) {
    const auto& c = ws.config;
    std::vector<Prediction> predictions;
    if (!c.predictions.empty()) {
        predictions = load_predictions(Workspace::need_input(c.predictions, "predictions"));
    } else {
        // Stand-in reader: answer with the page title of the best context.
        const auto contexts = by_id(read_jsonl(ws.need(files::reranked_contexts, Stage::RerankContexts)));
        JsonlBuffer out(ws.meta());
        for (const auto& row : read_jsonl(ws.need(files::reranked_titles, Stage::RerankTitles))) {
            Prediction p{row.at("id").get<std::string>(), row.at("titles").get<std::vector<std::string>>(), {}};
            json obj{{"id", p.id}, {"titles", p.titles}};
            if (auto it = contexts.find(p.id); it != contexts.end() && !it->second.at("contexts").empty()) {
                p.answer = it->second.at("contexts").front().at("title").get<std::string>();
                obj["answer"] = *p.answer;
            }
            out.add(obj);
            predictions.push_back(std::move(p));
        }
        out.commit(c.artifact(files::predictions));
    }
    std::size_t skipped = 0;
    const auto report = evaluate_predictions(ws.eval_queries(), predictions, c.k_titles, &skipped);
    emit_report(report, ReportFormat::Json, c.artifact(files::report_json), ws.meta());
    emit_report(report, ReportFormat::Table, c.artifact(files::report_table), ws.meta());
    const auto a = report.aggregate();
    auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string("-"); };
    return {"",
            {{"queries", std::to_string(report.queries.size())},
             {"skipped", std::to_string(skipped)},
             {"r_precision", fmt_double(a.r_precision)},
             {"recall_at_" + std::to_string(c.k_titles), fmt_double(a.recall_at_k)},
             {"em", opt(a.em)},
             {"kilt_em", opt(a.kilt_em)}},
            0};
}

} // namespace

// ---------------------------------------------------------------------------

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages = [] {
        std::vector<Stage> s;
        for (const auto& i : stage_table()) s.push_back(i.stage);
        return s;
    }();
    return stages;
}

std::string_view stage_name(Stage stage) { return info(stage).name; }

Stage parse_stage(std::string_view name) {
    for (const auto& s : stage_table())
        if (s.name == name) return s.stage;
    throw ValidationError("unknown stage: " + std::string(name));
}

const std::vector<Stage>& stage_dependencies(Stage stage) { return info(stage).deps; }

void check_acyclic(const std::map<Stage, std::vector<Stage>>& graph) {
    std::map<Stage, std::size_t> indegree;
    for (const auto& [node, deps] : graph) {
        indegree.try_emplace(node, 0);
        for (Stage d : deps) indegree.try_emplace(d, 0);
    }
    // Edges run dep -> node.
    for (const auto& [node, deps] : graph) indegree[node] += deps.size();
    std::queue<Stage> ready;
    for (const auto& [node, deg] : indegree)
        if (deg == 0) ready.push(node);
    std::size_t visited = 0;
    while (!ready.empty()) {
        Stage s = ready.front();
        ready.pop();
        ++visited;
        for (const auto& [node, deps] : graph)
            for (Stage d : deps)
                if (d == s && --indegree[node] == 0) ready.push(node);
    }
    if (visited != indegree.size()) {
        for (const auto& [node, deg] : indegree)
            if (deg > 0) throw ValidationError("stage graph has a cycle through '" + std::string(stage_name(node)) + "'");
    }
}

void validate_stage_graph() {
    std::map<Stage, std::vector<Stage>> graph;
    for (const auto& s : stage_table()) graph[s.stage] = s.deps;
    check_acyclic(graph);
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
    static const std::map<std::string, std::function<void(PipelineConfig&, const std::string&, const std::string&)>>
        setters{
            {"corpus", [](auto& c, auto&, auto& v) { c.corpus = v; }},
            {"train_queries", [](auto& c, auto&, auto& v) { c.train_queries = v; }},
            {"eval_queries", [](auto& c, auto&, auto& v) { c.eval_queries = v; }},
            {"generated_questions", [](auto& c, auto&, auto& v) { c.generated_questions = v; }},
            {"out", [](auto& c, auto&, auto& v) { c.out_dir = v; }},
            {"task", [](auto& c, auto&, auto& v) { c.task = parse_task_kind(v); }},
            {"seed", [](auto& c, auto& k, auto& v) { c.seed = to_size(k, v); }},
            {"embed_dim", [](auto& c, auto& k, auto& v) { c.embed_dim = to_size(k, v); }},
            {"hidden_dim", [](auto& c, auto& k, auto& v) { c.hidden_dim = to_size(k, v); }},
            {"window", [](auto& c, auto& k, auto& v) { c.window = to_size(k, v); }},
            {"train_beam_size", [](auto& c, auto& k, auto& v) { c.rl_decode.beam_size = to_size(k, v); }},
            {"eval_beam_size", [](auto& c, auto& k, auto& v) { c.eval_decode.beam_size = to_size(k, v); }},
            {"test_beam_size", [](auto& c, auto& k, auto& v) { c.test_decode.beam_size = to_size(k, v); }},
            {"max_titles_per_beam",
             [](auto& c, auto& k, auto& v) {
                 c.rl_decode.max_titles_per_beam = c.eval_decode.max_titles_per_beam =
                     c.test_decode.max_titles_per_beam = to_size(k, v);
             }},
            {"max_total_tokens",
             [](auto& c, auto& k, auto& v) {
                 c.rl_decode.max_total_tokens = c.eval_decode.max_total_tokens = c.test_decode.max_total_tokens =
                     to_size(k, v);
             }},
            {"pretrain_epochs", [](auto& c, auto& k, auto& v) { c.pretrain.epochs = to_size(k, v); }},
            {"pretrain_lr", [](auto& c, auto& k, auto& v) { c.pretrain.learning_rate = to_double(k, v); }},
            {"pretrain_batch", [](auto& c, auto& k, auto& v) { c.pretrain.batch_size = to_size(k, v); }},
            {"fewshot_epochs", [](auto& c, auto& k, auto& v) { c.fewshot.epochs = to_size(k, v); }},
            {"fewshot_lr", [](auto& c, auto& k, auto& v) { c.fewshot.learning_rate = to_double(k, v); }},
            {"fewshot_batch", [](auto& c, auto& k, auto& v) { c.fewshot.batch_size = to_size(k, v); }},
            {"rerank_epochs", [](auto& c, auto& k, auto& v) { c.rerank.epochs = to_size(k, v); }},
            {"rerank_lr", [](auto& c, auto& k, auto& v) { c.rerank.learning_rate = to_double(k, v); }},
            {"rerank_batch", [](auto& c, auto& k, auto& v) { c.rerank.batch_size = to_size(k, v); }},
            {"rl_zero_epochs", [](auto& c, auto& k, auto& v) { c.rl_zero.epochs = to_size(k, v); }},
            {"rl_zero_lr", [](auto& c, auto& k, auto& v) { c.rl_zero.learning_rate = to_double(k, v); }},
            {"rl_few_epochs", [](auto& c, auto& k, auto& v) { c.rl_few.epochs = to_size(k, v); }},
            {"rl_few_lr", [](auto& c, auto& k, auto& v) { c.rl_few.learning_rate = to_double(k, v); }},
            {"rl_mode", [](auto& c, auto&, auto& v) { c.rl_zero.mode = c.rl_few.mode = parse_rollout_mode(v); }},
            {"candidate_titles", [](auto& c, auto& k, auto& v) { c.candidate_titles = to_size(k, v); }},
            {"provider_contexts", [](auto& c, auto& k, auto& v) { c.provider_contexts = to_size(k, v); }},
            {"k_titles", [](auto& c, auto& k, auto& v) { c.k_titles = to_size(k, v); }},
            {"k_contexts", [](auto& c, auto& k, auto& v) { c.k_contexts = to_size(k, v); }},
            {"hard_negatives", [](auto& c, auto& k, auto& v) { c.hard_negatives = to_size(k, v); }},
            {"params", [](auto& c, auto&, auto& v) { c.params = v; }},
            {"queries", [](auto& c, auto&, auto& v) { c.queries = v; }},
            {"predictions", [](auto& c, auto&, auto& v) { c.predictions = v; }},
            {"output", [](auto& c, auto&, auto& v) { c.output = v; }},
        };
    auto it = setters.find(key);
    if (it == setters.end()) throw ValidationError("unknown config key: " + key);
    it->second(*this, key, value);
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
    static thread_local int depth = 0;
    if (depth > 16) throw ValidationError("config include depth exceeded at " + path.string());
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config: " + path.string());
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() || v.empty() ? p : base / p;
    };
    static const std::set<std::string> path_keys{"corpus",  "train_queries", "eval_queries", "generated_questions",
                                                 "out",     "params",        "queries",      "predictions",
                                                 "output"};
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        auto hash = line.find('#');
        std::string_view body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ParseError(path.string(), n, "expected key = value");
        const std::string key(trim(body.substr(0, eq)));
        const std::string value(trim(body.substr(eq + 1)));
        if (key == "include") {
            ++depth;
            try {
                apply_config_file(config, resolve(value));
            } catch (...) {
                --depth;
                throw;
            }
            --depth;
            continue;
        }
        try {
            config.set(key, path_keys.count(key) ? resolve(value).lexically_normal().string() : value);
        } catch (const ValidationError& e) {
            throw ParseError(path.string(), n, e.what());
        }
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    PipelineConfig config;
    apply_config_file(config, path);
    return config;
}

std::string StageSummary::line() const {
    std::string out = "stage=" + name;
    for (const auto& [k, v] : fields) out += " " + k + "=" + v;
    char buf[32];
    std::snprintf(buf, sizeof buf, " seconds=%.3f", seconds);
    return out + buf;
}

StageSummary run_stage(const PipelineConfig& config, Stage stage) {
    validate_stage_graph();
    const auto start = std::chrono::steady_clock::now();
    std::filesystem::create_directories(config.out_dir);
    Workspace ws{config, stage};
    StageSummary summary;
    try {
        switch (stage) {
        case Stage::Chunk: summary = stage_chunk(ws); break;
        case Stage::BuildTrie: summary = stage_build_trie(ws); break;
        case Stage::BuildIndex: summary = stage_build_index(ws); break;
        case Stage::Pretrain: summary = stage_pretrain(ws); break;
        case Stage::ReinforceZero:
            summary = stage_reinforce(ws, files::policy_zero, Stage::Pretrain, files::policy_zero_rl, config.rl_zero,
                                      "rl_zero_trace.csv");
            break;
        case Stage::FewShot: summary = stage_fewshot(ws); break;
        case Stage::ReinforceFew:
            summary = stage_reinforce(ws, files::policy_few, Stage::FewShot, files::policy_few_rl, config.rl_few,
                                      "rl_few_trace.csv");
            break;
        case Stage::MakeRerankData: summary = stage_make_rerank_data(ws); break;
        case Stage::RerankTitles: summary = stage_rerank_titles(ws); break;
        case Stage::RetrieveContexts: summary = stage_retrieve_contexts(ws); break;
        case Stage::RerankContexts: summary = stage_rerank_contexts(ws); break;
        case Stage::BuildReaderInputs: summary = stage_reader_inputs(ws); break;
        case Stage::Evaluate: summary = stage_evaluate(ws); break;
        }
    } catch (const DependencyError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(stage_name(stage)) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string(stage_name(stage)) + ": malformed artifact: " + e.what());
    } catch (const RuntimeError& e) {
        throw RuntimeError(std::string(stage_name(stage)) + ": " + e.what());
    }
    summary.name = std::string(stage_name(stage));
    summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return summary;
}

std::vector<StageSummary> run_pipeline(const PipelineConfig& config) {
    std::vector<StageSummary> out;
    for (Stage s : all_stages()) out.push_back(run_stage(config, s));
    return out;
}

StageSummary run_decode(const PipelineConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    Workspace ws{config, Stage::RerankTitles};
    const auto vocab = ws.vocab();
    const auto trie = ws.trie();
    const auto params = PolicyParams::load(Workspace::need_input(config.params, "params"));
    const auto queries = load_queries(Workspace::need_input(config.queries, "queries"), config.task);
    if (config.output.empty()) throw ValidationError("config key 'output' is not set");
    JsonlBuffer out(json{{"seed", config.seed}, {"stage", "decode"}});
    for (const auto& q : queries) {
        const auto hyps = constrained_beam_search(params, encode_query(kRankPrompt, q.input, vocab), trie, config.eval_decode);
        out.add({{"id", q.id}, {"titles", select_top_titles(hyps, config.k_titles)}, {"beams", beams_json(hyps)}});
    }
    out.commit(config.output);
    StageSummary s{"decode", {{"queries", std::to_string(out.count())}}, 0};
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

} // namespace re3val
