#include "re3val/rerank.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "re3val/error.hpp"
#include "re3val/random.hpp"
#include "re3val/text.hpp"

namespace re3val {

std::string_view to_string(MixSource mix) { return mix == MixSource::ZeroShot ? "zero" : "few"; }

std::string build_title_rerank_input(std::string_view query, const std::vector<std::string>& titles,
                                     const std::vector<std::string>& contexts, const InputLimits& limits) {
    std::string text(kRerankPrompt);
    text += first_words(query, limits.title_rerank_query_words);
    for (const auto& t : titles) text += " [SEP] " + t;
    for (const auto& c : contexts) text += " [SEP] " + c;
    return first_words(text, limits.title_rerank_max_tokens);
}

std::vector<std::string> rerank_target(const std::vector<std::string>& gold_titles,
                                       const std::vector<std::string>& input_titles) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& t : gold_titles)
        if (seen.insert(t).second) out.push_back(t);
    for (const auto& t : input_titles)
        if (seen.insert(t).second) out.push_back(t);
    return out;
}

PerturbedTitles perturb_training_titles(const std::vector<std::string>& zero_shot_titles,
                                        const std::vector<std::string>& few_shot_titles, std::size_t example_index,
                                        std::uint64_t seed) {
    if (zero_shot_titles.empty() || few_shot_titles.empty())
        throw ValidationError("perturbation needs non-empty zero-shot and few-shot title lists");
    PerturbedTitles out;
    out.mix = example_index % 2 == 0 ? MixSource::ZeroShot : MixSource::FewShot;
    out.titles = out.mix == MixSource::ZeroShot ? zero_shot_titles : few_shot_titles;
    const std::size_t top = (out.titles.size() + 1) / 2;
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(out.titles.data(), top));
    return out;
}

ChunkStore::ChunkStore(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
    for (std::size_t i = 0; i < chunks_.size(); ++i) by_title_[chunks_[i].title].push_back(i);
}

std::vector<Chunk> ChunkStore::chunks_for(const std::string& title) const {
    std::vector<Chunk> out;
    auto it = by_title_.find(title);
    if (it == by_title_.end()) return out;
    for (auto i : it->second) out.push_back(chunks_[i]);
    return out;
}

RetrievedContexts retrieve_contexts_for_titles(const std::vector<std::string>& titles, const ChunkStore& store,
                                               const InvertedIndex& title_index) {
    RetrievedContexts out;
    for (const auto& title : titles) {
        std::string resolved = title;
        if (!store.has_title(title)) {
            try {
                resolved = impute_title(title, title_index);
            } catch (const NoMatchError&) {
                out.warnings.push_back("no knowledge-base match for title '" + title + "'");
                continue;
            }
            if (!store.has_title(resolved)) {
                out.warnings.push_back("title '" + title + "' imputed to '" + resolved + "' which has no chunks");
                continue;
            }
        }
        for (auto& c : store.chunks_for(resolved)) out.contexts.push_back({title, std::move(c)});
    }
    return out;
}

std::string context_query_window(std::string_view query, TaskKind kind, const InputLimits& limits) {
    return kind == TaskKind::Dialogue ? last_words(query, limits.pair_dialogue_last_words)
                                      : first_words(query, limits.pair_query_first_words);
}

std::string build_context_pair_input(std::string_view query, std::string_view context, TaskKind kind,
                                     const InputLimits& limits) {
    std::string out = "[CLS] ";
    out += context_query_window(query, kind, limits);
    out += " [SEP] ";
    out += context;
    out += " [SEP]";
    return out;
}

double Bm25OverlapScorer::score(const QueryRecord& query, const Chunk& context) const {
    return stats_.score_text(normalize_words(context_query_window(query.input, query.task_kind, limits_)),
                             context.text);
}

double GoldIndicatorScorer::score(const QueryRecord& query, const Chunk& context) const {
    return std::find(query.gold_titles.begin(), query.gold_titles.end(), context.title) != query.gold_titles.end()
               ? 1.0
               : 0.0;
}

RerankedContexts rerank_contexts(const RelevanceScorer& scorer, const QueryRecord& query,
                                 const std::vector<Chunk>& contexts, std::size_t k) {
    RerankedContexts out;
    for (const auto& c : contexts) {
        try {
            out.contexts.push_back({c, scorer.score(query, c)});
        } catch (const std::exception& e) {
            out.warnings.push_back("scorer failed on '" + c.title + "' chunk " + std::to_string(c.chunk_index) +
                                   ": " + e.what());
        }
    }
    std::stable_sort(out.contexts.begin(), out.contexts.end(),
                     [](const ScoredContext& a, const ScoredContext& b) { return a.score > b.score; });
    if (out.contexts.size() > k) out.contexts.resize(k);
    return out;
}

std::string build_reader_input(std::string_view query, std::string_view title, std::string_view context,
                               TaskKind kind, const InputLimits& limits) {
    const std::string window = kind == TaskKind::Dialogue ? last_words(query, limits.reader_dialogue_last_words)
                                                          : first_words(query, limits.reader_query_first_words);
    std::string out = "question: " + window;
    out += ", title: ";
    out += title;
    out += ", context: ";
    out += context;
    return out;
}

std::vector<Chunk> Bm25ContextProvider::contexts(const QueryRecord& query, std::size_t k) const {
    std::vector<Chunk> out;
    if (k == 0) return out;
    for (const auto& hit : index_.search(query.input, k)) {
        if (hit.score <= 0.0) break;
        const auto& d = index_.doc(hit.doc);
        out.push_back({d.title, d.chunk_index.value_or(0), d.text});
    }
    return out;
}

std::vector<std::string> context_titles(const std::vector<Chunk>& ranked) {
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& c : ranked)
        if (seen.insert(c.title).second) out.push_back(c.title);
    return out;
}

} // namespace re3val
