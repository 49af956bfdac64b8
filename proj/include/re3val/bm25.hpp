#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "re3val/corpus.hpp"
#include "re3val/text.hpp"

namespace re3val {

using DocId = std::uint32_t;

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// A document as handed to the index: a title key, an optional chunk
/// position (for chunk indexes), and the text to index.
struct IndexedDoc {
    std::string title;
    std::optional<std::size_t> chunk_index;
    std::string text;
};

struct Posting {
    DocId doc = 0;
    std::uint32_t tf = 0;
    bool operator==(const Posting&) const = default;
};

struct ScoredDoc {
    DocId doc = 0;
    double score = 0.0;
};

/// Okapi BM25 over normalized words, with the +1-smoothed IDF
/// ln(1 + (N - n_t + 0.5) / (n_t + 0.5)), which keeps every score >= 0.
class InvertedIndex {
  public:
    static InvertedIndex build(std::vector<IndexedDoc> docs, Bm25Params params = {});
    static InvertedIndex build_titles(const std::vector<std::string>& titles, Bm25Params params = {});
    static InvertedIndex build_chunks(const std::vector<Chunk>& chunks, Bm25Params params = {});

    std::size_t doc_count() const { return docs_.size(); }
    double avgdl() const { return avgdl_; }
    std::uint32_t doc_length(DocId d) const { return lengths_.at(d); }
    const IndexedDoc& doc(DocId d) const { return docs_.at(d); }
    const Bm25Params& params() const { return params_; }

    /// Postings sorted by doc id; empty for unknown terms.
    const std::vector<Posting>& postings(const std::string& term) const;
    const std::map<std::string, std::vector<Posting>>& terms() const { return postings_; }
    std::uint32_t term_frequency(const std::string& term, DocId d) const;

    double idf(const std::string& term) const;

    /// Sum over query terms (repeats included) of the BM25 term weight.
    double score(const std::vector<std::string>& query_terms, DocId d) const;

    /// BM25 of an arbitrary text against this index's term statistics.
    double score_text(const std::vector<std::string>& query_terms, const std::string& text) const;

    /// Exact top-k by score; ties go to the smaller doc id. Zero-score
    /// documents are included when fewer than k documents match.
    std::vector<ScoredDoc> search(const std::string& query, std::size_t k) const;
    std::vector<ScoredDoc> search_terms(const std::vector<std::string>& terms, std::size_t k) const;

    /// Top-k restricted to documents accepted by `keep`.
    template <typename Pred>
    std::vector<ScoredDoc> search_filtered(const std::string& query, std::size_t k, Pred keep) const;

    std::optional<DocId> find_title(const std::string& title) const;
    std::vector<DocId> docs_with_title(const std::string& title) const;

    void save(const std::filesystem::path& path, std::uint64_t seed = 0) const;
    static InvertedIndex load(const std::filesystem::path& path);

  private:
    std::vector<double> score_all(const std::vector<std::string>& terms) const;
    static std::vector<ScoredDoc> top_k(std::vector<ScoredDoc> scored, std::size_t k);
    void finalize();

    Bm25Params params_;
    std::vector<IndexedDoc> docs_;
    std::vector<std::uint32_t> lengths_;
    double avgdl_ = 0.0;
    std::map<std::string, std::vector<Posting>> postings_;
    std::map<std::string, std::vector<DocId>> by_title_;
};

template <typename Pred>
std::vector<ScoredDoc> InvertedIndex::search_filtered(const std::string& query, std::size_t k, Pred keep) const {
    const auto scores = score_all(normalize_words(query));
    std::vector<ScoredDoc> scored;
    for (DocId d = 0; d < docs_.size(); ++d)
        if (keep(d)) scored.push_back({d, scores[d]});
    return top_k(std::move(scored), k);
}

/// Free-function forms of the index operations.
InvertedIndex build_index(std::vector<IndexedDoc> docs, Bm25Params params = {});
double bm25_score(const InvertedIndex& index, const std::vector<std::string>& query_terms, DocId doc);
std::vector<ScoredDoc> search_top_k(const InvertedIndex& index, const std::string& query, std::size_t k);

/// Identity for titles already in the index; otherwise the best BM25 match
/// with the missing title as the query. Throws NoMatchError when nothing
/// shares a term with it.
std::string impute_title(const std::string& missing_title, const InvertedIndex& title_index);

struct HardNegatives {
    /// Best non-gold chunks of the gold (labeled) titles.
    std::vector<Chunk> labeled_titles;
    /// Best chunks of predicted titles that are not gold.
    std::vector<Chunk> predicted_titles;
};

using ChunkKey = std::pair<std::string, std::size_t>;

HardNegatives mine_hard_negatives(const QueryRecord& query, const std::set<ChunkKey>& gold_chunks,
                                  const InvertedIndex& chunk_index, const std::vector<std::string>& predicted_titles,
                                  std::size_t k = 128);

} // namespace re3val
