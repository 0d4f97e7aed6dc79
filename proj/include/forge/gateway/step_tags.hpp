#pragma once

#include <string_view>

// Request tags name the pipeline step that issued a request. The mock
// backend keys its behaviour off them.
namespace forge::gateway::tags {

inline constexpr std::string_view kReconstruct = "reconstruct";
inline constexpr std::string_view kKgqaStep1 = "kgqa_step1";
inline constexpr std::string_view kKgqaStep2 = "kgqa_step2";
inline constexpr std::string_view kMedMcqaRefine = "medmcqa_refine";
inline constexpr std::string_view kTranslateQa = "translate_qa";
inline constexpr std::string_view kTranslateMcq = "translate_mcq";
inline constexpr std::string_view kPreferenceGenerate = "preference_generate";
inline constexpr std::string_view kMcqAnswer = "mcq_answer";
inline constexpr std::string_view kEvalOpening = "eval_opening";
inline constexpr std::string_view kPatientTurn = "patient_turn";
inline constexpr std::string_view kDoctorTurn = "doctor_turn";
inline constexpr std::string_view kJudge = "judge";

} // namespace forge::gateway::tags

namespace forge::gateway::temperature {

// Judging and answer extraction run greedy; generation steps may sample.
inline constexpr double kDeterministic = 0.0;
inline constexpr double kGeneration = 0.7;

} // namespace forge::gateway::temperature
