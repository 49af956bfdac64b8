#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "re3val/corpus.hpp"

namespace re3val {

/// Children of a trie node plus whether a complete title ends there. The
/// "title complete" bit is a virtual marker, never a vocabulary token.
struct AllowedNext {
    std::vector<TokenId> tokens;
    bool title_complete = false;

    bool operator==(const AllowedNext&) const = default;
};

/// Prefix tree over tokenized page titles.
class TitleTrie {
  public:
    using NodeIndex = std::uint32_t;
    static constexpr NodeIndex kRoot = 0;
    static constexpr std::int32_t kNoTitle = -1;

    struct Node {
        std::map<TokenId, NodeIndex> children;
        /// Index into the surface-title store when a title ends here.
        std::int32_t title = kNoTitle;
    };

    /// Titles that collapse to the same token sequence share one terminal;
    /// the first surface form wins. Empty title lists and titles with no
    /// tokens are rejected.
    static TitleTrie build(const std::vector<std::string>& titles, const Vocabulary& vocab);
    static TitleTrie build_from_tokens(const std::vector<std::vector<TokenId>>& titles,
                                       const std::vector<std::string>& surfaces);

    /// Node reached by following `prefix` from the root, if any.
    std::optional<NodeIndex> walk(std::span<const TokenId> prefix) const;

    AllowedNext allowed_next(std::span<const TokenId> prefix) const;
    AllowedNext allowed_at(NodeIndex node) const;

    bool contains_title(std::span<const TokenId> title_tokens) const;

    const Node& node(NodeIndex i) const { return nodes_.at(i); }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t title_count() const { return surfaces_.size(); }
    const std::string& surface(std::int32_t title) const { return surfaces_.at(static_cast<std::size_t>(title)); }
    const std::vector<std::string>& surfaces() const { return surfaces_; }

    /// Every root-to-terminal token path, in depth-first token order.
    std::vector<std::vector<TokenId>> enumerate_titles() const;

    void save(const std::filesystem::path& path, std::uint64_t seed = 0) const;
    static TitleTrie load(const std::filesystem::path& path);

  private:
    std::vector<Node> nodes_{Node{}};
    std::vector<std::string> surfaces_;
};

} // namespace re3val
