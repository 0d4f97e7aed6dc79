#pragma once

// Converts English multiple-choice items into Chinese training dialogues.
//
// Most items go through two steps: the backend rewrites question and gold
// answer into an instruction/knowledge pair, then translates that pair
// into a one-round consultation. A seeded share keeps its multiple-choice
// form and is only translated.

#include <cstdint>
#include <string>
#include <vector>

#include "forge/common/clock.hpp"
#include "forge/datamodel/types.hpp"
#include "forge/gateway/gateway.hpp"

namespace forge::mcq {

struct ConversionOptions {
    std::string backend_id;
    double mcq_fraction = 0.25;
    std::uint64_t seed = 0;
    std::size_t workers = 4;
    Clock clock = fixed_clock(0);
};

/// Positions (ascending) of the items that keep the multiple-choice form:
/// round-half-up(n * mcq_fraction) of them.
std::vector<std::size_t> choose_mcq_kept(std::size_t n, double mcq_fraction, std::uint64_t seed);

gateway::ChatRequest build_refine_prompt(const McqItem& item, const std::string& backend_id);
gateway::ChatRequest build_translate_qa_prompt(const std::string& instruction, const std::string& knowledge,
                                               const std::string& backend_id);
gateway::ChatRequest build_translate_mcq_prompt(const McqItem& item, const std::string& backend_id);

struct ConversionQuarantine {
    std::string item_id;
    std::string step;
    std::string reason;
    std::string raw_response;
};

struct ConversionBatch {
    std::vector<DialogueSample> samples;  // input order
    std::vector<ConversionQuarantine> quarantine;
    std::size_t kept_mcq = 0;
};

/// Samples are stage-1 `medmcqa` dialogues with id "medmcqa-<item id>".
ConversionBatch convert_medmcqa(const std::vector<McqItem>& items, gateway::Gateway& gw,
                                const ConversionOptions& options);

} // namespace forge::mcq
