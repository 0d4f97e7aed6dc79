#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "forge/gateway/chat.hpp"

namespace forge::gateway {

/// Content-addressed response store. Each entry lives at
/// `<dir>/<digest[0:2]>/<digest>.json` and holds the canonical request next
/// to the response, so a cache directory doubles as an audit trail.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<ChatResponse> lookup(const std::string& digest);
    /// First write wins; later stores under the same digest are no-ops.
    void store(const std::string& digest, const ChatRequest& request, const ChatResponse& response);

    std::size_t entry_count() const;
    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path entry_path(const std::string& digest) const;

private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::map<std::string, ChatResponse> memory_;
};

} // namespace forge::gateway
