#include "forge/common/error.hpp"

namespace forge {

namespace {

std::string joined(const std::vector<std::string>& items, std::size_t limit = 10) {
    std::string out;
    for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
    return out;
}

} // namespace

ValidationError::ValidationError(std::string sample_id, std::vector<std::string> violations)
    : Error("sample '" + sample_id + "' is invalid: " + joined(violations)),
      sample_id_(std::move(sample_id)),
      violations_(std::move(violations)) {}

IngestError::IngestError(const std::string& what, std::vector<std::string> labels)
    : Error(what + ": " + joined(labels)), labels_(std::move(labels)) {}

ShortfallError::ShortfallError(std::string stratum, std::size_t requested, std::size_t available)
    : Error("stratum '" + stratum + "' has " + std::to_string(available) + " items, " +
            std::to_string(requested) + " requested (deficit " +
            std::to_string(requested - available) + ")"),
      stratum_(std::move(stratum)),
      requested_(requested),
      available_(available) {}

LeakError::LeakError(const std::string& what, std::vector<std::string> ids)
    : Error(what + ": " + joined(ids)), ids_(std::move(ids)) {}

} // namespace forge
