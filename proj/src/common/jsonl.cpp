#include "forge/common/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "forge/common/digest.hpp"
#include "forge/common/error.hpp"
#include "forge/common/text.hpp"

namespace forge {

namespace fs = std::filesystem;

void for_each_jsonl(const fs::path& path, const std::function<void(std::size_t, const json&)>& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, path.filename().string() + ": " + e.what());
        }
        try {
            fn(line_no, record);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(line_no, path.filename().string() + ": " + e.what());
        }
    }
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::vector<json> out;
    for_each_jsonl(path, [&](std::size_t, const json& j) { out.push_back(j); });
    return out;
}

std::size_t write_jsonl(const fs::path& path, const std::vector<json>& records) {
    std::string buf;
    for (const auto& r : records) {
        buf += r.dump();
        buf += '\n';
    }
    write_text_atomic(path, buf);
    return records.size();
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& value) {
    write_text_atomic(path, value.dump(2) + "\n");
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    fs::path tmp = path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_digest(const fs::path& path) { return sha256_hex(read_text_file(path)); }

} // namespace forge
