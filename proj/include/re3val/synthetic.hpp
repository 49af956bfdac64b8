#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "re3val/corpus.hpp"

namespace re3val {

/// Knobs for the built-in synthetic knowledge source and query set.
struct SyntheticSpec {
    std::size_t num_titles = 100;
    std::size_t num_queries = 50;
    std::size_t max_gold_titles = 2;
    std::size_t title_word_pool = 30;
    std::size_t key_words_per_title = 3;
    std::size_t passage_words = 160;
    std::uint64_t seed = 7;
};

struct SyntheticData {
    std::vector<KnowledgeRecord> records;
    std::vector<QueryRecord> queries;
};

/// Pseudo-word corpus where each page has a few key words that only it
/// uses; queries mention key words of their gold pages plus filler.
SyntheticData make_synthetic(const SyntheticSpec& spec);

std::string knowledge_jsonl(const std::vector<KnowledgeRecord>& records);
std::string queries_jsonl(const std::vector<QueryRecord>& queries);

} // namespace re3val
