#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "re3val/bm25.hpp"
#include "re3val/corpus.hpp"

namespace re3val {

inline constexpr std::string_view kRankPrompt = "rank document titles given a query: ";
inline constexpr std::string_view kRerankPrompt = "rerank document titles given a query and contexts: ";

/// Window and length limits of the reranker, context reranker and reader inputs.
struct InputLimits {
    std::size_t title_rerank_query_words = 250;
    std::size_t title_rerank_max_tokens = 512;
    std::size_t pair_query_first_words = 150;
    std::size_t pair_dialogue_last_words = 300;
    std::size_t reader_query_first_words = 125;
    std::size_t reader_dialogue_last_words = 385;
};

enum class MixSource { ZeroShot, FewShot };
std::string_view to_string(MixSource mix);

struct RerankTitleExample {
    std::string input;
    std::vector<std::string> target;
    MixSource mix = MixSource::ZeroShot;
};

/// Prompt, query (first 250 words), titles and contexts joined by " [SEP] "
/// and hard-truncated to 512 whitespace tokens.
std::string build_title_rerank_input(std::string_view query, const std::vector<std::string>& titles,
                                     const std::vector<std::string>& contexts, const InputLimits& limits = {});

/// Gold titles first in gold order, then the other input titles in input order.
std::vector<std::string> rerank_target(const std::vector<std::string>& gold_titles,
                                       const std::vector<std::string>& input_titles);

struct PerturbedTitles {
    std::vector<std::string> titles;
    MixSource mix = MixSource::ZeroShot;
};

/// Picks the zero-shot list for even `example_index` and the few-shot list
/// for odd, then uniformly permutes its top ceil(n/2) positions.
PerturbedTitles perturb_training_titles(const std::vector<std::string>& zero_shot_titles,
                                        const std::vector<std::string>& few_shot_titles, std::size_t example_index,
                                        std::uint64_t seed);

/// Chunks grouped by page title, in corpus order.
class ChunkStore {
  public:
    ChunkStore() = default;
    explicit ChunkStore(std::vector<Chunk> chunks);

    const std::vector<Chunk>& chunks() const { return chunks_; }
    bool has_title(const std::string& title) const { return by_title_.count(title) != 0; }
    std::vector<Chunk> chunks_for(const std::string& title) const;

  private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_title_;
};

struct RetrievedContext {
    std::string requested_title;
    Chunk chunk;
};

struct RetrievedContexts {
    std::vector<RetrievedContext> contexts;
    std::vector<std::string> warnings;
};

/// Chunks of each title in rank order. Titles unknown to the store are
/// replaced by their BM25 imputation; unmatched titles are dropped with a warning.
RetrievedContexts retrieve_contexts_for_titles(const std::vector<std::string>& titles, const ChunkStore& store,
                                               const InvertedIndex& title_index);

struct ContextPair {
    std::string text;
    int label = 0;
};

/// Query window for the context reranker: first 150 words, or the last 300
/// words for dialogue.
std::string context_query_window(std::string_view query, TaskKind kind, const InputLimits& limits = {});

/// "[CLS] {query window} [SEP] {context} [SEP]"
std::string build_context_pair_input(std::string_view query, std::string_view context, TaskKind kind,
                                     const InputLimits& limits = {});

/// Scores a (query, context) pair; higher is more relevant. May throw for
/// an item, which is then dropped.
class RelevanceScorer {
  public:
    virtual ~RelevanceScorer() = default;
    virtual double score(const QueryRecord& query, const Chunk& context) const = 0;
};

/// BM25 of the context against the context-reranker query window, using the
/// chunk index for term statistics.
class Bm25OverlapScorer : public RelevanceScorer {
  public:
    explicit Bm25OverlapScorer(const InvertedIndex& stats, InputLimits limits = {}) : stats_(stats), limits_(limits) {}
    double score(const QueryRecord& query, const Chunk& context) const override;

  private:
    const InvertedIndex& stats_;
    InputLimits limits_;
};

/// 1 for contexts of gold titles, 0 otherwise.
class GoldIndicatorScorer : public RelevanceScorer {
  public:
    double score(const QueryRecord& query, const Chunk& context) const override;
};

struct ScoredContext {
    Chunk chunk;
    double score = 0.0;
};

struct RerankedContexts {
    std::vector<ScoredContext> contexts;
    std::vector<std::string> warnings;
};

/// Stable sort by descending score, truncated to k.
RerankedContexts rerank_contexts(const RelevanceScorer& scorer, const QueryRecord& query,
                                 const std::vector<Chunk>& contexts, std::size_t k = 5);

/// "question: {query window}, title: {title}, context: {context}" with the
/// first 125 query words, or the last 385 for dialogue.
std::string build_reader_input(std::string_view query, std::string_view title, std::string_view context,
                               TaskKind kind = TaskKind::QA, const InputLimits& limits = {});

/// Source of passages used as the reranking query for page titles.
class ContextProvider {
  public:
    virtual ~ContextProvider() = default;
    virtual std::vector<Chunk> contexts(const QueryRecord& query, std::size_t k) const = 0;
};

/// Top-k chunks by BM25 against the query text.
class Bm25ContextProvider : public ContextProvider {
  public:
    explicit Bm25ContextProvider(const InvertedIndex& chunk_index) : index_(chunk_index) {}
    std::vector<Chunk> contexts(const QueryRecord& query, std::size_t k) const override;

  private:
    const InvertedIndex& index_;
};

/// Distinct page titles of a context ranking, in first-occurrence order.
std::vector<std::string> context_titles(const std::vector<Chunk>& ranked);

} // namespace re3val
