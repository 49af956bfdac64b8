#include "re3val/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "re3val/error.hpp"
#include "re3val/text.hpp"

namespace re3val {

using nlohmann::json;

void for_each_json_line(std::istream& in, const std::string& source,
                        const std::function<void(const json&, std::size_t)>& fn) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, n, e.what());
        }
        if (!obj.is_object()) throw ParseError(source, n, "expected a JSON object");
        if (obj.contains(kMetaKey)) continue;
        fn(obj, n);
    }
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<json> out;
    for_each_json_line(in, path.string(), [&](const json& obj, std::size_t) { out.push_back(obj); });
    return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw RuntimeError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw RuntimeError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

JsonlBuffer::JsonlBuffer(const json& meta) {
    body_ = json{{kMetaKey, meta}}.dump() + "\n";
}

void JsonlBuffer::add(const json& obj) {
    body_ += obj.dump();
    body_ += '\n';
    ++count_;
}

void BinaryReader::need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ValidationError(source_ + ": truncated snapshot");
}

void BinaryReader::expect_header(std::string_view magic, std::uint32_t version) {
    need(8);
    if (data_.compare(pos_, 8, std::string(magic).append(8 - magic.size(), '\0')) != 0)
        throw ValidationError(source_ + ": bad magic, expected " + std::string(magic));
    pos_ += 8;
    auto v = get<std::uint32_t>();
    if (v != version)
        throw ValidationError(source_ + ": unsupported version " + std::to_string(v));
}

void put_header(BinaryWriter& w, std::string_view magic, std::uint32_t version) {
    std::string tag(magic);
    tag.resize(8, '\0');
    for (char c : tag) w.put(c);
    w.put(version);
}

} // namespace re3val
