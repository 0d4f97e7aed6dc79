#include "forge/gateway/cache.hpp"

#include "forge/common/jsonl.hpp"

namespace forge::gateway {

namespace fs = std::filesystem;

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::entry_path(const std::string& digest) const {
    return dir_ / digest.substr(0, 2) / (digest + ".json");
}

std::optional<ChatResponse> ResponseCache::lookup(const std::string& digest) {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
    const auto path = entry_path(digest);
    if (!fs::exists(path)) return std::nullopt;
    auto entry = read_json_file(path);
    auto response = entry.at("response").get<ChatResponse>();
    memory_.emplace(digest, response);
    return response;
}

void ResponseCache::store(const std::string& digest, const ChatRequest& request, const ChatResponse& response) {
    std::lock_guard lock(mu_);
    if (memory_.contains(digest)) return;
    const auto path = entry_path(digest);
    ChatResponse clean = response;
    clean.cached = false;
    if (!fs::exists(path)) {
        json entry{{"digest", digest},
                   {"request", canonical_request(request)},
                   {"request_tag", request.request_tag},
                   {"response", clean}};
        write_text_atomic(path, entry.dump() + "\n");
    }
    memory_.emplace(digest, clean);
}

std::size_t ResponseCache::entry_count() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    if (!fs::exists(dir_)) return 0;
    for (const auto& e : fs::recursive_directory_iterator(dir_))
        if (e.is_regular_file() && e.path().extension() == ".json") ++n;
    return n;
}

} // namespace forge::gateway
