#include <algorithm>
#include <regex>
#include <sstream>

#include "forge/common/numeric.hpp"
#include "forge/common/tagged_text.hpp"
#include "forge/common/text.hpp"
#include "forge/datamodel/serialize.hpp"
#include "forge/dialogue_eval/dialogue_eval.hpp"
#include "forge/gateway/step_tags.hpp"
#include "forge/gateway/structured.hpp"

namespace forge::dialogue_eval {

using gateway::ChatRequest;
using gateway::MessageRole;

namespace {

const char* const kVerdictFormat =
    "Reply with exactly four lines and nothing else:\n"
    "proactivity: <integer 1-5>\n"
    "accuracy: <integer 1-5>\n"
    "helpfulness: <integer 1-5>\n"
    "linguistic_quality: <integer 1-5>";

std::string metric_key(std::string name) {
    name = trim(name);
    std::string out;
    for (char c : name) out += c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

void set_metric(JudgeScore& s, std::size_t i, double v) {
    switch (i) {
    case 0: s.proactivity = v; break;
    case 1: s.accuracy = v; break;
    case 2: s.helpfulness = v; break;
    default: s.linguistic_quality = v; break;
    }
}

std::array<double, 4> metrics_of(const JudgeScore& s) {
    return {s.proactivity, s.accuracy, s.helpfulness, s.linguistic_quality};
}

// An integer in [1, 5], or the reason it is not one.
std::variant<int, std::string> read_score(const std::string& token, std::string_view metric) {
    static const std::regex integer(R"(^[+-]?\d+$)");
    if (!std::regex_match(token, integer))
        return "score '" + token + "' for " + std::string(metric) + " is not an integer";
    const long v = std::stol(token);
    if (v < 1 || v > 5)
        return "score " + token + " for " + std::string(metric) + " is outside 1..5";
    return static_cast<int>(v);
}

} // namespace

ChatRequest build_judge_request(const Transcript& t, const std::string& backend_id) {
    std::string dialogue;
    for (const auto& turn : t.turns) dialogue += std::string(to_string(turn.role)) + ": " + normalize_whitespace(turn.content) + "\n";
    ChatRequest r;
    r.backend_id = backend_id;
    r.messages = {
        {MessageRole::system,
         "You are a senior physician reviewing how a doctor handled an online consultation. Score the doctor's "
         "side of the conversation from 1 (very poor) to 5 (excellent) on each criterion:\n"
         "proactivity: when the patient has not given enough information, the doctor asks clear, specific "
         "questions to obtain it.\n"
         "accuracy: what the doctor says is medically correct and contains no factual mistakes.\n"
         "helpfulness: the doctor's replies give the patient clear, practical guidance they can act on.\n"
         "linguistic_quality: the doctor writes fluently and naturally, and the conversation flows logically."},
        {MessageRole::user, "Consultation to review:\n\n" + render_input_block("transcript", dialogue) + "\n" +
                                kVerdictFormat}};
    r.temperature = gateway::temperature::kDeterministic;
    r.max_tokens = 256;
    r.request_tag = std::string(gateway::tags::kJudge);
    return r;
}

std::variant<JudgeScore, std::string> parse_verdict(const std::string& reply) {
    static const std::regex named(R"(^\s*([A-Za-z][A-Za-z _-]*?)\s*(?::|：|=)\s*(\S+?)[.,;]?\s*$)");
    JudgeScore score;
    std::array<bool, 4> seen{};
    bool any_named = false;
    for (const auto& line : split_lines(reply)) {
        std::smatch m;
        if (!std::regex_match(line, m, named)) continue;
        const auto key = metric_key(m[1].str());
        auto it = std::find(kMetricNames.begin(), kMetricNames.end(), key);
        if (it == kMetricNames.end()) continue;
        const auto i = static_cast<std::size_t>(it - kMetricNames.begin());
        any_named = true;
        if (seen[i]) return "metric " + key + " appears twice";
        auto v = read_score(m[2].str(), key);
        if (auto* problem = std::get_if<std::string>(&v)) return *problem;
        set_metric(score, i, std::get<int>(v));
        seen[i] = true;
    }
    if (any_named) {
        for (std::size_t i = 0; i < 4; ++i)
            if (!seen[i]) return "metric " + std::string(kMetricNames[i]) + " is missing";
        return score;
    }

    static const std::regex number(R"([+-]?\d+(?:\.\d+)?)");
    std::vector<std::string> tokens;
    for (auto it = std::sregex_iterator(reply.begin(), reply.end(), number); it != std::sregex_iterator(); ++it)
        tokens.push_back(it->str());
    if (tokens.size() != 4) return std::string("expected one score per metric in the form 'name: n'");
    for (std::size_t i = 0; i < 4; ++i) {
        auto v = read_score(tokens[i], kMetricNames[i]);
        if (auto* problem = std::get_if<std::string>(&v)) return *problem;
        set_metric(score, i, std::get<int>(v));
    }
    return score;
}

JudgeOutcome judge(const Transcript& t, gateway::Gateway& gw, const std::string& backend_id) {
    if (!t.complete) throw PreconditionError("transcript for '" + t.case_id + "' is incomplete");
    auto reply = gateway::chat_structured<JudgeScore>(gw, build_judge_request(t, backend_id), parse_verdict,
                                                      kVerdictFormat);
    return {reply.value, reply.problem, reply.reply};
}

std::string_view to_string(GroupBy g) {
    switch (g) {
    case GroupBy::none: return "none";
    case GroupBy::source: return "source";
    case GroupBy::department: return "department";
    case GroupBy::intent: return "intent";
    }
    return "none";
}

GroupBy parse_group_by(std::string_view s) {
    for (auto g : {GroupBy::none, GroupBy::source, GroupBy::department, GroupBy::intent})
        if (to_string(g) == s) return g;
    throw Error("unknown grouping '" + std::string(s) + "'");
}

MetricRow row_from_means(const std::string& group, const std::array<double, 4>& means) {
    MetricRow row;
    row.group = group;
    row.means = means;
    row.overall = stable_mean(means);
    return row;
}

Aggregate aggregate(const std::vector<ScoredCase>& scored, GroupBy group_by) {
    std::map<std::string, std::array<std::vector<double>, 4>> groups;
    for (const auto& s : scored) {
        std::string key;
        switch (group_by) {
        case GroupBy::none: key = "all"; break;
        case GroupBy::source: key = std::string(to_string(s.source)); break;
        case GroupBy::department:
            if (s.source != EvalSource::cmd) continue;
            key = s.group_key;
            break;
        case GroupBy::intent:
            if (s.source != EvalSource::cmid) continue;
            key = s.group_key;
            break;
        }
        const auto m = metrics_of(s.score);
        for (std::size_t i = 0; i < 4; ++i) groups[key][i].push_back(m[i]);
    }
    if (groups.empty()) throw PreconditionError("no scored cases to aggregate by " + std::string(to_string(group_by)));

    Aggregate out;
    out.group_by = group_by;
    for (const auto& [key, columns] : groups) {
        std::array<double, 4> means{};
        for (std::size_t i = 0; i < 4; ++i) means[i] = stable_mean(columns[i]);
        auto row = row_from_means(key, means);
        row.cases = columns[0].size();
        out.rows.push_back(std::move(row));
    }
    std::stable_sort(out.rows.begin(), out.rows.end(),
                     [](const MetricRow& a, const MetricRow& b) { return a.overall > b.overall; });
    return out;
}

json to_json(const Aggregate& a) {
    json rows = json::array();
    for (const auto& r : a.rows) {
        json row{{"group", r.group}, {"cases", r.cases}, {"average", r.overall}};
        for (std::size_t i = 0; i < 4; ++i) row[std::string(kMetricNames[i])] = r.means[i];
        rows.push_back(std::move(row));
    }
    return json{{"group_by", to_string(a.group_by)}, {"rows", rows}};
}

std::string render_table(const Aggregate& a) {
    std::ostringstream os;
    auto cell = [&](const std::string& text, std::size_t width) {
        os << text;
        for (auto n = text.size(); n < width; ++n) os << ' ';
    };
    cell("group", 20);
    cell("n", 6);
    for (auto name : kMetricNames) cell(std::string(name), name.size() + 2);
    os << "average\n";
    for (const auto& r : a.rows) {
        cell(r.group, 20);
        cell(std::to_string(r.cases), 6);
        for (std::size_t i = 0; i < 4; ++i) cell(format_half_up(r.means[i], 2), kMetricNames[i].size() + 2);
        os << format_half_up(r.overall, 2) << "\n";
    }
    return os.str();
}

json run_report(const EvalRun& run) {
    std::map<std::string, std::size_t> by_source;
    for (const auto& c : run.cases) ++by_source[std::string(to_string(c.source))];
    json opening = json::array();
    for (const auto& f : run.opening_failures)
        opening.push_back({{"case_id", f.case_id}, {"reason", f.reason}, {"raw_response", f.raw_response}});
    json incomplete = json::array();
    for (const auto& t : run.transcripts)
        if (!t.complete) incomplete.push_back({{"case_id", t.case_id}, {"failure", t.failure.value_or("")}});
    json judged = json::array();
    for (const auto& [id, o] : run.judge_failures)
        judged.push_back({{"case_id", id}, {"reason", o.problem}, {"raw_response", o.raw_response}});

    json aggregates = json::object();
    for (auto g : {GroupBy::none, GroupBy::source, GroupBy::department, GroupBy::intent}) {
        try {
            aggregates[std::string(to_string(g))] = to_json(aggregate(run.scored, g));
        } catch (const PreconditionError&) {
        }
    }
    return json{{"cases", run.cases.size() + run.opening_failures.size()},
                {"cases_by_source", by_source},
                {"opening_failures", opening},
                {"incomplete_transcripts", incomplete},
                {"judge_failures", judged},
                {"scored", run.scored.size()},
                {"aggregates", aggregates}};
}

} // namespace forge::dialogue_eval
