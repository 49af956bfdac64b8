#include "re3val/synthetic.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "re3val/error.hpp"
#include "re3val/random.hpp"
#include "re3val/text.hpp"

namespace re3val {

namespace {

constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};

class WordFactory {
  public:
    explicit WordFactory(Rng& rng) : rng_(rng) {}

    std::string fresh(std::size_t syllables) {
        for (;;) {
            std::string w;
            for (std::size_t i = 0; i < syllables; ++i) {
                w += kOnsets[rng_.below(std::size(kOnsets))];
                w += kVowels[rng_.below(std::size(kVowels))];
            }
            if (used_.insert(w).second) return w;
        }
    }

  private:
    Rng& rng_;
    std::set<std::string> used_;
};

std::string capitalize(std::string w) {
    if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

} // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.num_titles == 0) throw ValidationError("synthetic corpus needs at least one title");
    Rng rng(spec.seed);
    WordFactory words(rng);

    std::vector<std::string> title_pool;
    for (std::size_t i = 0; i < spec.title_word_pool; ++i) title_pool.push_back(words.fresh(2));
    std::vector<std::string> filler;
    for (std::size_t i = 0; i < 40; ++i) filler.push_back(words.fresh(1 + i % 2));

    SyntheticData data;
    std::set<std::vector<std::string>> seen;
    std::vector<std::vector<std::string>> keys;
    while (data.records.size() < spec.num_titles) {
        const std::size_t len = 1 + rng.below(3);
        std::vector<std::string> tw;
        for (std::size_t i = 0; i < len; ++i) tw.push_back(title_pool[rng.below(title_pool.size())]);
        if (!seen.insert(tw).second) continue;

        std::vector<std::string> key;
        for (std::size_t i = 0; i < spec.key_words_per_title; ++i) key.push_back(words.fresh(3));

        KnowledgeRecord rec;
        rec.wikipedia_id = std::to_string(1000 + data.records.size());
        std::vector<std::string> surface;
        for (const auto& w : tw) surface.push_back(capitalize(w));
        rec.title = join_words(surface);
        rec.lines.push_back(rec.title + "\n");
        rec.lines.push_back("Section::::Overview.\n");
        std::size_t written = 0;
        while (written < spec.passage_words) {
            std::vector<std::string> sentence;
            const std::size_t n = 8 + rng.below(8);
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = rng.below(10);
                if (r < 3) sentence.push_back(key[rng.below(key.size())]);
                else if (r < 4) sentence.push_back(tw[rng.below(tw.size())]);
                else sentence.push_back(filler[rng.below(filler.size())]);
            }
            written += sentence.size();
            rec.lines.push_back(capitalize(join_words(sentence)) + ".\n");
            if (rng.below(6) == 0) rec.lines.push_back("BULLET::::- " + filler[rng.below(filler.size())] + "\n");
        }
        keys.push_back(std::move(key));
        data.records.push_back(std::move(rec));
    }

    for (std::size_t q = 0; q < spec.num_queries; ++q) {
        const std::size_t gold_n = 1 + rng.below(std::max<std::size_t>(1, spec.max_gold_titles));
        std::vector<std::size_t> gold;
        while (gold.size() < std::min(gold_n, data.records.size())) {
            auto g = rng.below(data.records.size());
            if (std::find(gold.begin(), gold.end(), g) == gold.end()) gold.push_back(g);
        }
        std::vector<std::string> qw;
        for (auto g : gold) {
            auto k = keys[g];
            rng.shuffle(std::span<std::string>(k));
            qw.push_back(k[0]);
            qw.push_back(k[1]);
        }
        for (std::size_t i = 0; i < 3; ++i) qw.push_back(filler[rng.below(filler.size())]);
        rng.shuffle(std::span<std::string>(qw));

        QueryRecord rec;
        rec.id = "q" + std::to_string(q);
        rec.input = "what links " + join_words(qw) + "?";
        for (auto g : gold) rec.gold_titles.push_back(data.records[g].title);
        rec.gold_answers.push_back(data.records[gold.front()].title);
        data.queries.push_back(std::move(rec));
    }
    return data;
}

std::string knowledge_jsonl(const std::vector<KnowledgeRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::json obj{{"wikipedia_id", r.wikipedia_id}, {"wikipedia_title", r.title}, {"text", r.lines}};
        out += obj.dump() + "\n";
    }
    return out;
}

std::string queries_jsonl(const std::vector<QueryRecord>& queries) {
    std::string out;
    for (const auto& q : queries) {
        nlohmann::json provenance = nlohmann::json::array();
        for (const auto& t : q.gold_titles) provenance.push_back({{"wikipedia_title", t}});
        nlohmann::json outputs = nlohmann::json::array();
        for (std::size_t i = 0; i < q.gold_answers.size(); ++i) {
            nlohmann::json o{{"answer", q.gold_answers[i]}};
            if (i == 0) o["provenance"] = provenance;
            outputs.push_back(o);
        }
        if (q.gold_answers.empty() && !q.gold_titles.empty()) outputs.push_back({{"provenance", provenance}});
        nlohmann::json obj{{"id", q.id}, {"input", q.input}};
        if (!outputs.empty()) obj["output"] = outputs;
        out += obj.dump() + "\n";
    }
    return out;
}

} // namespace re3val
