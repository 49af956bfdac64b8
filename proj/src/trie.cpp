#include "re3val/trie.hpp"

#include "re3val/error.hpp"
#include "re3val/jsonl.hpp"

namespace re3val {

namespace {
constexpr std::string_view kMagic = "R3TRIE";
constexpr std::uint32_t kVersion = 1;
} // namespace

TitleTrie TitleTrie::build(const std::vector<std::string>& titles, const Vocabulary& vocab) {
    std::vector<std::vector<TokenId>> tokens;
    tokens.reserve(titles.size());
    for (const auto& t : titles) tokens.push_back(tokenize(t, vocab));
    return build_from_tokens(tokens, titles);
}

TitleTrie TitleTrie::build_from_tokens(const std::vector<std::vector<TokenId>>& titles,
                                       const std::vector<std::string>& surfaces) {
    if (titles.empty()) throw ValidationError("cannot build a title trie from an empty title list");
    if (titles.size() != surfaces.size()) throw ValidationError("title/surface count mismatch");
    TitleTrie trie;
    for (std::size_t i = 0; i < titles.size(); ++i) {
        if (titles[i].empty()) throw ValidationError("title has no tokens: '" + surfaces[i] + "'");
        NodeIndex cur = kRoot;
        for (TokenId tok : titles[i]) {
            auto it = trie.nodes_[cur].children.find(tok);
            if (it == trie.nodes_[cur].children.end()) {
                auto next = static_cast<NodeIndex>(trie.nodes_.size());
                trie.nodes_[cur].children.emplace(tok, next);
                trie.nodes_.emplace_back();
                cur = next;
            } else {
                cur = it->second;
            }
        }
        if (trie.nodes_[cur].title == kNoTitle) {
            trie.nodes_[cur].title = static_cast<std::int32_t>(trie.surfaces_.size());
            trie.surfaces_.push_back(surfaces[i]);
        }
    }
    return trie;
}

std::optional<TitleTrie::NodeIndex> TitleTrie::walk(std::span<const TokenId> prefix) const {
    NodeIndex cur = kRoot;
    for (TokenId tok : prefix) {
        const auto& children = nodes_[cur].children;
        auto it = children.find(tok);
        if (it == children.end()) return std::nullopt;
        cur = it->second;
    }
    return cur;
}

AllowedNext TitleTrie::allowed_at(NodeIndex node) const {
    const Node& n = nodes_.at(node);
    AllowedNext out;
    out.tokens.reserve(n.children.size());
    for (const auto& [tok, child] : n.children) out.tokens.push_back(tok);
    out.title_complete = n.title != kNoTitle;
    return out;
}

AllowedNext TitleTrie::allowed_next(std::span<const TokenId> prefix) const {
    auto node = walk(prefix);
    if (!node) throw InvalidPrefixError("prefix is not a path in the title trie");
    return allowed_at(*node);
}

bool TitleTrie::contains_title(std::span<const TokenId> title_tokens) const {
    auto node = walk(title_tokens);
    return node && nodes_[*node].title != kNoTitle;
}

std::vector<std::vector<TokenId>> TitleTrie::enumerate_titles() const {
    std::vector<std::vector<TokenId>> out;
    std::vector<TokenId> path;
    auto visit = [&](auto&& self, NodeIndex n) -> void {
        if (nodes_[n].title != kNoTitle) out.push_back(path);
        for (const auto& [tok, child] : nodes_[n].children) {
            path.push_back(tok);
            self(self, child);
            path.pop_back();
        }
    };
    visit(visit, kRoot);
    return out;
}

void TitleTrie::save(const std::filesystem::path& path, std::uint64_t seed) const {
    BinaryWriter w;
    put_header(w, kMagic, kVersion);
    w.put<std::uint64_t>(seed);
    w.put<std::uint64_t>(nodes_.size());
    for (const auto& n : nodes_) {
        w.put<std::int32_t>(n.title);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(n.children.size()));
        for (const auto& [tok, child] : n.children) {
            w.put<TokenId>(tok);
            w.put<NodeIndex>(child);
        }
    }
    w.put<std::uint64_t>(surfaces_.size());
    for (const auto& s : surfaces_) w.put_string(s);
    write_file_atomic(path, w.str());
}

TitleTrie TitleTrie::load(const std::filesystem::path& path) {
    BinaryReader r(read_file(path), path.string());
    r.expect_header(kMagic, kVersion);
    r.get<std::uint64_t>(); // seed
    TitleTrie trie;
    auto n = r.get<std::uint64_t>();
    trie.nodes_.assign(n, Node{});
    for (auto& node : trie.nodes_) {
        node.title = r.get<std::int32_t>();
        auto k = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < k; ++i) {
            auto tok = r.get<TokenId>();
            auto child = r.get<NodeIndex>();
            if (child >= n) throw ValidationError(path.string() + ": child index out of range");
            node.children.emplace(tok, child);
        }
    }
    auto s = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < s; ++i) trie.surfaces_.push_back(r.get_string());
    return trie;
}

} // namespace re3val
