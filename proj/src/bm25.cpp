#include "re3val/bm25.hpp"

#include <algorithm>
#include <cmath>

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"

namespace re3val {

namespace {
constexpr std::string_view kMagic = "R3BM25";
constexpr std::uint32_t kVersion = 1;
const std::vector<Posting> kNoPostings;
} // namespace

InvertedIndex InvertedIndex::build(std::vector<IndexedDoc> docs, Bm25Params params) {
    if (docs.empty()) throw ValidationError("cannot build a BM25 index over an empty corpus");
    InvertedIndex index;
    index.params_ = params;
    index.docs_ = std::move(docs);
    index.lengths_.reserve(index.docs_.size());
    for (DocId d = 0; d < index.docs_.size(); ++d) {
        const auto words = normalize_words(index.docs_[d].text);
        index.lengths_.push_back(static_cast<std::uint32_t>(words.size()));
        std::map<std::string, std::uint32_t> tf;
        for (const auto& w : words) ++tf[w];
        for (const auto& [term, count] : tf) index.postings_[term].push_back({d, count});
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize() {
    double total = 0.0;
    for (auto len : lengths_) total += len;
    avgdl_ = total / static_cast<double>(lengths_.size());
    by_title_.clear();
    for (DocId d = 0; d < docs_.size(); ++d) by_title_[docs_[d].title].push_back(d);
}

InvertedIndex InvertedIndex::build_titles(const std::vector<std::string>& titles, Bm25Params params) {
    std::vector<IndexedDoc> docs;
    docs.reserve(titles.size());
    for (const auto& t : titles) docs.push_back({t, std::nullopt, t});
    return build(std::move(docs), params);
}

InvertedIndex InvertedIndex::build_chunks(const std::vector<Chunk>& chunks, Bm25Params params) {
    std::vector<IndexedDoc> docs;
    docs.reserve(chunks.size());
    for (const auto& c : chunks) docs.push_back({c.title, c.chunk_index, c.text});
    return build(std::move(docs), params);
}

const std::vector<Posting>& InvertedIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? kNoPostings : it->second;
}

std::uint32_t InvertedIndex::term_frequency(const std::string& term, DocId d) const {
    const auto& list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), d, [](const Posting& p, DocId id) { return p.doc < id; });
    return it != list.end() && it->doc == d ? it->tf : 0;
}

double InvertedIndex::idf(const std::string& term) const {
    const double n = static_cast<double>(postings(term).size());
    const double N = static_cast<double>(docs_.size());
    return std::log(1.0 + (N - n + 0.5) / (n + 0.5));
}

namespace {

double term_weight(double idf, double tf, double dl, double avgdl, const Bm25Params& p) {
    return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl));
}

} // namespace

double InvertedIndex::score(const std::vector<std::string>& query_terms, DocId d) const {
    if (d >= docs_.size()) throw ValidationError("unknown document id " + std::to_string(d));
    double total = 0.0;
    for (const auto& term : query_terms) {
        const auto tf = term_frequency(term, d);
        if (tf == 0) continue;
        total += term_weight(idf(term), tf, lengths_[d], avgdl_, params_);
    }
    return total;
}

double InvertedIndex::score_text(const std::vector<std::string>& query_terms, const std::string& text) const {
    const auto words = normalize_words(text);
    std::map<std::string, std::uint32_t> tf;
    for (const auto& w : words) ++tf[w];
    double total = 0.0;
    for (const auto& term : query_terms) {
        auto it = tf.find(term);
        if (it == tf.end()) continue;
        total += term_weight(idf(term), it->second, static_cast<double>(words.size()), avgdl_, params_);
    }
    return total;
}

std::vector<double> InvertedIndex::score_all(const std::vector<std::string>& terms) const {
    std::vector<double> scores(docs_.size(), 0.0);
    for (const auto& term : terms) {
        const auto& list = postings(term);
        if (list.empty()) continue;
        const double w = idf(term);
        for (const auto& p : list) scores[p.doc] += term_weight(w, p.tf, lengths_[p.doc], avgdl_, params_);
    }
    return scores;
}

std::vector<ScoredDoc> InvertedIndex::top_k(std::vector<ScoredDoc> scored, std::size_t k) {
    auto better = [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc < b.doc;
    };
    const std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    scored.resize(keep);
    return scored;
}

std::vector<ScoredDoc> InvertedIndex::search_terms(const std::vector<std::string>& terms, std::size_t k) const {
    if (k == 0) throw ValidationError("search needs k >= 1");
    const auto scores = score_all(terms);
    std::vector<ScoredDoc> scored(docs_.size());
    for (DocId d = 0; d < docs_.size(); ++d) scored[d] = {d, scores[d]};
    return top_k(std::move(scored), k);
}

std::vector<ScoredDoc> InvertedIndex::search(const std::string& query, std::size_t k) const {
    return search_terms(normalize_words(query), k);
}

std::optional<DocId> InvertedIndex::find_title(const std::string& title) const {
    auto it = by_title_.find(title);
    if (it == by_title_.end()) return std::nullopt;
    return it->second.front();
}

std::vector<DocId> InvertedIndex::docs_with_title(const std::string& title) const {
    auto it = by_title_.find(title);
    return it == by_title_.end() ? std::vector<DocId>{} : it->second;
}

void InvertedIndex::save(const std::filesystem::path& path, std::uint64_t seed) const {
    BinaryWriter w;
    put_header(w, kMagic, kVersion);
    w.put<std::uint64_t>(seed);
    w.put(params_.k1);
    w.put(params_.b);
    w.put<std::uint64_t>(docs_.size());
    for (DocId d = 0; d < docs_.size(); ++d) {
        w.put_string(docs_[d].title);
        w.put<std::int64_t>(docs_[d].chunk_index ? static_cast<std::int64_t>(*docs_[d].chunk_index) : -1);
        w.put_string(docs_[d].text);
        w.put<std::uint32_t>(lengths_[d]);
    }
    w.put<std::uint64_t>(postings_.size());
    for (const auto& [term, list] : postings_) {
        w.put_string(term);
        w.put_vector(list);
    }
    write_file_atomic(path, w.str());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
    BinaryReader r(read_file(path), path.string());
    r.expect_header(kMagic, kVersion);
    r.get<std::uint64_t>(); // seed
    InvertedIndex index;
    index.params_.k1 = r.get<double>();
    index.params_.b = r.get<double>();
    auto n = r.get<std::uint64_t>();
    if (n == 0) throw ValidationError(path.string() + ": empty index");
    for (std::uint64_t i = 0; i < n; ++i) {
        IndexedDoc doc;
        doc.title = r.get_string();
        auto ci = r.get<std::int64_t>();
        if (ci >= 0) doc.chunk_index = static_cast<std::size_t>(ci);
        doc.text = r.get_string();
        index.docs_.push_back(std::move(doc));
        index.lengths_.push_back(r.get<std::uint32_t>());
    }
    auto terms = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < terms; ++i) {
        auto term = r.get_string();
        index.postings_.emplace(std::move(term), r.get_vector<Posting>());
    }
    index.finalize();
    return index;
}

InvertedIndex build_index(std::vector<IndexedDoc> docs, Bm25Params params) {
    return InvertedIndex::build(std::move(docs), params);
}

double bm25_score(const InvertedIndex& index, const std::vector<std::string>& query_terms, DocId doc) {
    return index.score(query_terms, doc);
}

std::vector<ScoredDoc> search_top_k(const InvertedIndex& index, const std::string& query, std::size_t k) {
    return index.search(query, k);
}

std::string impute_title(const std::string& missing_title, const InvertedIndex& title_index) {
    if (title_index.find_title(missing_title)) return missing_title;
    const auto top = title_index.search(missing_title, 1);
    if (top.empty() || top.front().score <= 0.0)
        throw NoMatchError("no knowledge-base title shares a term with '" + missing_title + "'");
    return title_index.doc(top.front().doc).title;
}

namespace {

std::vector<Chunk> to_chunks(const InvertedIndex& index, const std::vector<ScoredDoc>& hits) {
    std::vector<Chunk> out;
    out.reserve(hits.size());
    for (const auto& h : hits) {
        const auto& d = index.doc(h.doc);
        out.push_back({d.title, d.chunk_index.value_or(0), d.text});
    }
    return out;
}

} // namespace

HardNegatives mine_hard_negatives(const QueryRecord& query, const std::set<ChunkKey>& gold_chunks,
                                  const InvertedIndex& chunk_index, const std::vector<std::string>& predicted_titles,
                                  std::size_t k) {
    HardNegatives out;
    if (k == 0) return out;
    const std::set<std::string> gold(query.gold_titles.begin(), query.gold_titles.end());
    std::set<std::string> predicted;
    for (const auto& t : predicted_titles)
        if (!gold.count(t)) predicted.insert(t);
    auto is_gold_chunk = [&](DocId d) {
        const auto& doc = chunk_index.doc(d);
        return gold_chunks.count({doc.title, doc.chunk_index.value_or(0)}) != 0;
    };
    out.labeled_titles = to_chunks(chunk_index, chunk_index.search_filtered(query.input, k, [&](DocId d) {
        return gold.count(chunk_index.doc(d).title) && !is_gold_chunk(d);
    }));
    if (!predicted.empty()) {
        out.predicted_titles = to_chunks(chunk_index, chunk_index.search_filtered(query.input, k, [&](DocId d) {
            return predicted.count(chunk_index.doc(d).title) && !is_gold_chunk(d);
        }));
    }
    return out;
}

} // namespace re3val
