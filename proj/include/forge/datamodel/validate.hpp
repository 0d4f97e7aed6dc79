#pragma once

#include <optional>
#include <string>
#include <vector>

#include "forge/datamodel/types.hpp"

namespace forge {

struct Violation {
    std::string invariant;  // e.g. "role_alternation", "final_role"
    std::optional<std::size_t> turn_index;
    std::string detail;

    bool operator==(const Violation&) const = default;
    std::string describe() const;
};

/// Checks every DialogueSample invariant. Violations are data: an empty
/// result means the sample is well-formed.
std::vector<Violation> validate_sample(const DialogueSample& sample);

/// Throws ValidationError if `validate_sample` reports anything.
void require_valid(const DialogueSample& sample);

} // namespace forge
