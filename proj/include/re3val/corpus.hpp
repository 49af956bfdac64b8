#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace re3val {

using TokenId = std::uint32_t;

struct KnowledgeRecord {
    std::string wikipedia_id;
    std::string title;
    std::vector<std::string> lines;
};

struct Chunk {
    std::string title;
    std::size_t chunk_index = 0;
    std::string text;

    bool operator==(const Chunk&) const = default;
};

enum class TaskKind { QA, FactCheck, Dialogue };

TaskKind parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind kind);

struct QueryRecord {
    std::string id;
    std::string input;
    /// Distinct provenance titles in order of first appearance.
    std::vector<std::string> gold_titles;
    std::vector<std::string> gold_answers;
    TaskKind task_kind = TaskKind::QA;
};

/// Word-level vocabulary. Ids 0..3 are reserved for the structural tokens;
/// every other id maps to exactly one word.
class Vocabulary {
  public:
    static constexpr TokenId kBos = 0;
    static constexpr TokenId kEos = 1;
    static constexpr TokenId kSep = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr std::size_t kNumSpecial = 4;

    Vocabulary();

    /// Builds from every normalized word of `texts`, in order of first use.
    static Vocabulary build(const std::vector<std::string>& texts);

    TokenId add(const std::string& word);
    TokenId id(const std::string& word) const;
    bool contains(const std::string& word) const { return ids_.count(word) != 0; }
    const std::string& token(TokenId id) const;
    std::size_t size() const { return tokens_.size(); }

    /// One token per line, preceded by "# {header}" when a header is given.
    void save(const std::filesystem::path& path, std::string_view header = {}) const;
    static Vocabulary load(const std::filesystem::path& path);

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> ids_;
};

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab);

std::vector<KnowledgeRecord> read_knowledge_source(std::istream& in, const std::string& source = "<stream>");
std::vector<KnowledgeRecord> load_knowledge_source(const std::filesystem::path& path);

std::vector<QueryRecord> read_queries(std::istream& in, TaskKind kind = TaskKind::QA,
                                      const std::string& source = "<stream>");
std::vector<QueryRecord> load_queries(const std::filesystem::path& path, TaskKind kind = TaskKind::QA);

/// Drops lines that are just the page title or carry section/bullet markup,
/// then cuts the remaining words into consecutive non-overlapping chunks.
std::vector<Chunk> chunk_passage(const KnowledgeRecord& record, std::size_t words_per_chunk = 100);

/// Entity labels that on their own do not make a generated question specific.
const std::set<std::string>& non_substantive_entity_labels();

/// Keep a generated question only if it mentions at least one entity whose
/// label is outside the non-substantive set.
bool filter_generated_question(std::string_view question, const std::set<std::string>& entity_tags);

} // namespace re3val
