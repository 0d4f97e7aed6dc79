#include <array>
#include <string>
#include <vector>

#include "forge/common/digest.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/gateway/backend.hpp"
#include "forge/gateway/step_tags.hpp"

namespace forge::gateway {

namespace {

const std::string& last_user_message(const ChatRequest& r) {
    for (auto it = r.messages.rbegin(); it != r.messages.rend(); ++it)
        if (it->role == MessageRole::user) return it->content;
    return r.messages.back().content;
}

std::string find_block(const ChatRequest& r, std::string_view name) {
    for (const auto& m : r.messages)
        if (auto b = extract_input_block(m.content, name)) return *b;
    return {};
}

constexpr std::string_view kDialogueTags[] = {"patient", "doctor"};
constexpr std::string_view kQaTags[] = {"instruction", "knowledge"};

std::string fallback(const std::string& digest) { return "Mock reply " + digest.substr(0, 8) + "."; }

std::string reconstruct_reply(const ChatRequest& r, const std::string& digest) {
    auto turns = parse_tagged(find_block(r, "dialogue"), kDialogueTags, false);
    if (!turns) return fallback(digest);
    return render_tagged(*turns);
}

std::string kgqa_step1_reply(const ChatRequest& r, const std::string& digest) {
    std::string disease;
    std::vector<std::string> facts;
    for (const auto& line : split_lines(find_block(r, "knowledge"))) {
        auto colon = line.find(": ");
        if (colon == std::string::npos) continue;
        auto key = line.substr(0, colon);
        auto value = trim(line.substr(colon + 2));
        if (key == "disease")
            disease = value;
        else if (!value.empty())
            facts.push_back(key + ": " + value);
    }
    if (disease.empty() || facts.empty()) return fallback(digest);
    std::vector<TaggedLine> out{{"instruction", "What should I know about " + disease + "?"},
                                {"knowledge", disease + " - " + join(facts, "; ")}};
    return render_tagged(out);
}

std::string qa_to_dialogue_reply(const ChatRequest& r, const std::string& digest) {
    auto qa = parse_tagged(find_block(r, "qa"), kQaTags, false);
    if (!qa || qa->size() != 2) return fallback(digest);
    std::vector<TaggedLine> out{{"patient", (*qa)[0].text}, {"doctor", (*qa)[1].text}};
    return render_tagged(out);
}

struct McqBlock {
    std::string question;
    std::vector<std::pair<std::string, std::string>> options;
    std::string answer;
    std::string explanation;
};

McqBlock parse_mcq_block(const std::string& body) {
    McqBlock b;
    for (const auto& line : split_lines(body)) {
        if (starts_with_ci(line, "question: "))
            b.question = trim(line.substr(10));
        else if (starts_with_ci(line, "answer: "))
            b.answer = trim(line.substr(8));
        else if (starts_with_ci(line, "explanation: "))
            b.explanation = trim(line.substr(13));
        else if (line.size() > 3 && line[0] >= 'A' && line[0] <= 'Z' && line[1] == '.' && line[2] == ' ')
            b.options.emplace_back(line.substr(0, 1), trim(line.substr(3)));
    }
    return b;
}

std::string medmcqa_refine_reply(const ChatRequest& r, const std::string& digest) {
    auto b = parse_mcq_block(find_block(r, "mcq"));
    std::string answer_text;
    for (const auto& [l, t] : b.options)
        if (l == b.answer) answer_text = t;
    if (b.question.empty() || answer_text.empty()) return fallback(digest);
    std::string knowledge = answer_text + ".";
    if (!b.explanation.empty()) knowledge += " " + b.explanation;
    std::vector<TaggedLine> out{{"instruction", b.question}, {"knowledge", knowledge}};
    return render_tagged(out);
}

std::string translate_mcq_reply(const ChatRequest& r, const std::string& digest) {
    auto b = parse_mcq_block(find_block(r, "mcq"));
    if (b.question.empty() || b.options.empty() || b.answer.empty()) return fallback(digest);
    std::string patient = b.question;
    for (const auto& [l, t] : b.options) patient += "\n" + l + ". " + t;
    std::string doctor = "The answer is " + b.answer + ".";
    if (!b.explanation.empty()) doctor += " " + b.explanation;
    std::vector<TaggedLine> out{{"patient", patient}, {"doctor", doctor}};
    return render_tagged(out);
}

std::string preference_reply(const ChatRequest& r, const std::string& digest) {
    auto turns = parse_tagged(find_block(r, "seed"), kDialogueTags, false);
    if (!turns) return fallback(digest);
    for (auto& t : *turns)
        if (t.tag == "doctor") t.text += " If anything changes or worsens, please see a doctor in person.";
    return render_tagged(*turns);
}

std::string mcq_answer_reply(const ChatRequest& r, const std::string& digest) {
    std::vector<std::string> letters;
    for (const auto& line : split_lines(find_block(r, "question")))
        if (line.size() > 2 && line[0] >= 'A' && line[0] <= 'Z' && line[1] == '.') letters.push_back(line.substr(0, 1));
    if (letters.empty()) return fallback(digest);
    const auto pick = static_cast<std::size_t>(std::stoul(digest.substr(0, 8), nullptr, 16)) % letters.size();
    return "Answer: " + letters[pick];
}

std::string opening_reply(const ChatRequest& r, const std::string& digest) {
    auto material = find_block(r, "case");
    if (is_blank(material)) return fallback(digest);
    const auto ref = sha256_hex(trim(material)).substr(0, 8);
    std::vector<TaggedLine> out{
        {"question", "Doctor, I need advice about this (case " + ref + "): " + utf8_prefix(trim(material), 60)}};
    return render_tagged(out);
}

std::string patient_reply(const ChatRequest& r, const std::string& digest) {
    auto material = find_block(r, "case");
    return "More details (" + digest.substr(0, 8) + "): " + utf8_prefix(normalize_whitespace(material), 40);
}

std::string doctor_reply(const std::string& digest) {
    return "Thank you (" + digest.substr(0, 8) +
           "). When did this start, and are you taking any medication at the moment?";
}

std::string judge_reply(const std::string& digest) {
    static constexpr std::array<std::string_view, 4> kNames{"proactivity", "accuracy", "helpfulness",
                                                            "linguistic_quality"};
    std::string out;
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        auto byte = std::stoul(digest.substr(i * 2, 2), nullptr, 16);
        out += std::string(kNames[i]) + ": " + std::to_string(1 + byte % 5) + "\n";
    }
    return out;
}

} // namespace

ChatResponse make_stop_response(std::string content, const ChatRequest& request) {
    ChatResponse resp;
    int prompt_chars = 0;
    for (const auto& m : request.messages) prompt_chars += static_cast<int>(utf8_length(m.content));
    resp.usage.prompt_tokens = prompt_chars / 4 + 1;
    resp.usage.completion_tokens = static_cast<int>(utf8_length(content)) / 4 + 1;
    resp.content = std::move(content);
    resp.finish_reason = FinishReason::stop;
    return resp;
}

ChatResponse MockBackend::complete(const ChatRequest& request) {
    validate_request(request);
    const std::string digest = sha256_hex(normalize_whitespace(last_user_message(request)));
    const auto& tag = request.request_tag;

    std::string content;
    if (tag == tags::kReconstruct)
        content = reconstruct_reply(request, digest);
    else if (tag == tags::kKgqaStep1)
        content = kgqa_step1_reply(request, digest);
    else if (tag == tags::kKgqaStep2 || tag == tags::kTranslateQa)
        content = qa_to_dialogue_reply(request, digest);
    else if (tag == tags::kMedMcqaRefine)
        content = medmcqa_refine_reply(request, digest);
    else if (tag == tags::kTranslateMcq)
        content = translate_mcq_reply(request, digest);
    else if (tag == tags::kPreferenceGenerate)
        content = preference_reply(request, digest);
    else if (tag == tags::kMcqAnswer)
        content = mcq_answer_reply(request, digest);
    else if (tag == tags::kEvalOpening)
        content = opening_reply(request, digest);
    else if (tag == tags::kPatientTurn)
        content = patient_reply(request, digest);
    else if (tag == tags::kDoctorTurn)
        content = doctor_reply(digest);
    else if (tag == tags::kJudge)
        content = judge_reply(digest);
    else
        content = fallback(digest);
    return make_stop_response(std::move(content), request);
}

} // namespace forge::gateway
