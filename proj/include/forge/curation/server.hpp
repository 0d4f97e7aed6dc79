#pragma once

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "forge/curation/curation.hpp"

namespace forge::curation {

/// What the HTTP layer may draw on besides the store.
struct ServerContext {
    std::vector<DialogueSample> candidate_pool;  // for POST /api/candidates
    std::set<std::string> exclusion_ids;         // ids already used in stage 1
    gateway::Gateway* gateway = nullptr;         // for POST /api/generate
    GenerationOptions generation;                // defaults for generation batches
    std::size_t target = 2000;                   // reported by /api/stats
};

/// JSON API over a CurationStore:
///
///   GET  /api/items?state=&department=   list (array of items)
///   GET  /api/items/{id}                 one item
///   POST /api/items/{id}/decision        {"decision","edited_version","notes"}, X-Reviewer header
///   POST /api/items/{id}/promote         promote an accepted/edited item
///   POST /api/candidates                 {"target","seed"} select from the pool
///   POST /api/generate                   {"target","k","seed"} few-shot batch
///   GET  /api/export                     stage-2 set as NDJSON
///   GET  /api/stats                      counts per state
///
/// Errors are {"error": message} with 400 (bad request), 404 (unknown
/// item), 409 (illegal transition, leak), 422 (invalid sample, shortfall,
/// unmet precondition) or 503 (no backend configured).
class CurationServer {
public:
    CurationServer(CurationStore& store, ServerContext context);
    ~CurationServer();
    CurationServer(const CurationServer&) = delete;
    CurationServer& operator=(const CurationServer&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a
    /// free port. Throws Error when the address cannot be bound.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void serve(const std::string& host, int port);
    /// Stops serving and flushes the store.
    void stop();
    int port() const noexcept { return port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    CurationStore& store_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace forge::curation
