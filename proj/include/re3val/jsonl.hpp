#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <json.hpp>

namespace re3val {

/// Key of the optional first-line provenance object written into pipeline
/// artifacts. Readers skip such lines.
inline constexpr const char* kMetaKey = "__meta__";

/// Calls `fn(object, line_number)` for every non-blank line. Malformed JSON
/// raises ParseError carrying the 1-based line number.
void for_each_json_line(std::istream& in, const std::string& source,
                        const std::function<void(const nlohmann::json&, std::size_t)>& fn);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Accumulates JSON lines, optionally behind a meta header line.
class JsonlBuffer {
  public:
    JsonlBuffer() = default;
    explicit JsonlBuffer(const nlohmann::json& meta);

    void add(const nlohmann::json& obj);
    const std::string& str() const { return body_; }
    std::size_t count() const { return count_; }
    void commit(const std::filesystem::path& path) const { write_file_atomic(path, body_); }

  private:
    std::string body_;
    std::size_t count_ = 0;
};

/// Little-endian-native binary writer used by the snapshot formats.
class BinaryWriter {
  public:
    template <typename T>
        requires std::is_trivially_copyable_v<T>
    void put(const T& v) {
        const char* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    void put_string(std::string_view s) {
        put<std::uint64_t>(s.size());
        buf_.append(s.data(), s.size());
    }
    template <typename T>
    void put_vector(const std::vector<T>& v) {
        put<std::uint64_t>(v.size());
        buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
    const std::string& str() const { return buf_; }

  private:
    std::string buf_;
};

class BinaryReader {
  public:
    BinaryReader(std::string data, std::string source) : data_(std::move(data)), source_(std::move(source)) {}

    template <typename T>
        requires std::is_trivially_copyable_v<T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string() {
        auto n = get<std::uint64_t>();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    template <typename T>
    std::vector<T> get_vector() {
        auto n = get<std::uint64_t>();
        need(n * sizeof(T));
        std::vector<T> v(n);
        std::memcpy(v.data(), data_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }
    /// Reads and checks an 8-byte magic tag and a version word.
    void expect_header(std::string_view magic, std::uint32_t version);
    bool at_end() const { return pos_ == data_.size(); }

  private:
    void need(std::size_t n) const;

    std::string data_;
    std::string source_;
    std::size_t pos_ = 0;
};

void put_header(BinaryWriter& w, std::string_view magic, std::uint32_t version);

} // namespace re3val
