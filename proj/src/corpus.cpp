#include "re3val/corpus.hpp"

#include <fstream>
#include <istream>
#include <unordered_set>

#include <json.hpp>

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"
#include "re3val/text.hpp"

namespace re3val {

using nlohmann::json;

TaskKind parse_task_kind(std::string_view name) {
    if (name == "qa" || name == "QA") return TaskKind::QA;
    if (name == "factcheck" || name == "fact-check" || name == "FactCheck") return TaskKind::FactCheck;
    if (name == "dialogue" || name == "Dialogue") return TaskKind::Dialogue;
    throw ValidationError("unknown task kind: " + std::string(name));
}

std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::QA: return "qa";
    case TaskKind::FactCheck: return "factcheck";
    case TaskKind::Dialogue: return "dialogue";
    }
    return "qa";
}

Vocabulary::Vocabulary() {
    for (const char* special : {"<bos>", "<eos>", "<sep>", "<unk>"}) {
        ids_.emplace(special, static_cast<TokenId>(tokens_.size()));
        tokens_.emplace_back(special);
    }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
    Vocabulary vocab;
    for (const auto& text : texts)
        for (const auto& word : normalize_words(text)) vocab.add(word);
    return vocab;
}

TokenId Vocabulary::add(const std::string& word) {
    auto [it, inserted] = ids_.emplace(word, static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.push_back(word);
    return it->second;
}

TokenId Vocabulary::id(const std::string& word) const {
    auto it = ids_.find(word);
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id >= tokens_.size()) throw ValidationError("token id out of range: " + std::to_string(id));
    return tokens_[id];
}

void Vocabulary::save(const std::filesystem::path& path, std::string_view header) const {
    std::string body;
    if (!header.empty()) body.append("# ").append(header).append("\n");
    for (const auto& t : tokens_) body += t + "\n";
    write_file_atomic(path, body);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocabulary: " + path.string());
    Vocabulary vocab;
    std::string line;
    std::size_t n = 0, line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("# ", 0) == 0) continue;
        if (n < kNumSpecial) {
            if (line != vocab.tokens_[n]) throw ParseError(path.string(), line_no, "expected special token " + vocab.tokens_[n]);
        } else if (vocab.add(line) != n) {
            throw ParseError(path.string(), line_no, "duplicate token " + line);
        }
        ++n;
    }
    return vocab;
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    for (const auto& word : normalize_words(text)) ids.push_back(vocab.id(word));
    return ids;
}

std::string detokenize(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += vocab.token(ids[i]);
    }
    return out;
}

std::vector<KnowledgeRecord> read_knowledge_source(std::istream& in, const std::string& source) {
    std::vector<KnowledgeRecord> records;
    std::unordered_set<std::string> seen;
    for_each_json_line(in, source, [&](const json& obj, std::size_t line) {
        try {
            KnowledgeRecord rec;
            rec.wikipedia_id = obj.at("wikipedia_id").get<std::string>();
            rec.title = obj.at("wikipedia_title").get<std::string>();
            rec.lines = obj.at("text").get<std::vector<std::string>>();
            if (rec.title.empty()) throw ParseError(source, line, "empty wikipedia_title");
            if (!seen.insert(rec.title).second) throw DuplicateKeyError(rec.title);
            records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw ParseError(source, line, e.what());
        }
    });
    return records;
}

std::vector<KnowledgeRecord> load_knowledge_source(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open knowledge source: " + path.string());
    return read_knowledge_source(in, path.string());
}

std::vector<QueryRecord> read_queries(std::istream& in, TaskKind kind, const std::string& source) {
    std::vector<QueryRecord> queries;
    for_each_json_line(in, source, [&](const json& obj, std::size_t line) {
        try {
            QueryRecord q;
            q.task_kind = kind;
            const auto& id = obj.at("id");
            q.id = id.is_string() ? id.get<std::string>() : id.dump();
            q.input = obj.at("input").get<std::string>();
            if (auto it = obj.find("output"); it != obj.end() && it->is_array()) {
                std::unordered_set<std::string> titles, answers;
                for (const auto& out : *it) {
                    if (auto a = out.find("answer"); a != out.end() && a->is_string()) {
                        auto answer = a->get<std::string>();
                        if (answers.insert(answer).second) q.gold_answers.push_back(answer);
                    }
                    if (auto p = out.find("provenance"); p != out.end() && p->is_array()) {
                        for (const auto& prov : *p) {
                            auto title = prov.at("wikipedia_title").get<std::string>();
                            if (titles.insert(title).second) q.gold_titles.push_back(title);
                        }
                    }
                }
            }
            queries.push_back(std::move(q));
        } catch (const json::exception& e) {
            throw ParseError(source, line, e.what());
        }
    });
    return queries;
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path, TaskKind kind) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open queries: " + path.string());
    return read_queries(in, kind, path.string());
}

std::vector<Chunk> chunk_passage(const KnowledgeRecord& record, std::size_t words_per_chunk) {
    std::vector<std::string> words;
    const std::string_view title = trim(record.title);
    for (const auto& line : record.lines) {
        if (trim(line) == title) continue;
        if (line.find("Section::::") != std::string::npos || line.find("BULLET::::") != std::string::npos) continue;
        for (auto& w : split_words(line)) words.push_back(std::move(w));
    }
    std::vector<Chunk> chunks;
    for (std::size_t start = 0; start < words.size(); start += words_per_chunk) {
        std::size_t end = std::min(words.size(), start + words_per_chunk);
        std::string text;
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) text += ' ';
            text += words[i];
        }
        chunks.push_back({record.title, chunks.size(), std::move(text)});
    }
    return chunks;
}

const std::set<std::string>& non_substantive_entity_labels() {
    static const std::set<std::string> labels{"DATE", "MONEY", "CARDINAL", "TIME", "QUANTITY", "ORDINAL", "PERCENT"};
    return labels;
}

bool filter_generated_question(std::string_view /*question*/, const std::set<std::string>& entity_tags) {
    const auto& weak = non_substantive_entity_labels();
    for (const auto& tag : entity_tags)
        if (!weak.count(tag)) return true;
    return false;
}

} // namespace re3val
