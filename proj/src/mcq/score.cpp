#include <set>
#include <sstream>

#include "forge/common/numeric.hpp"
#include "forge/mcq/mcq.hpp"

namespace forge::mcq {

MissingPredictionsError::MissingPredictionsError(const std::string& what, std::vector<std::string> ids)
    : Error(what + " (" + std::to_string(ids.size()) + " items)"), ids_(std::move(ids)) {}

double unweighted_average(const std::vector<double>& subset_accuracies) { return stable_mean(subset_accuracies); }

McqReport score(const std::vector<Prediction>& predictions, const Benchmark& benchmark, Averaging averaging) {
    std::map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions)
        if (!by_id.emplace(p.item_id, &p).second) throw PreconditionError("duplicate prediction for '" + p.item_id + "'");

    McqReport report;
    report.averaging = averaging;
    std::vector<std::string> missing;
    std::set<std::string> benchmark_ids;
    for (const auto& item : benchmark.items) {
        benchmark_ids.insert(item.id);
        auto& s = report.subsets[item.subset];
        ++s.total;
        auto it = by_id.find(item.id);
        if (it == by_id.end()) {
            missing.push_back(item.id);
            continue;
        }
        const auto& answer = it->second->answer;
        if (!answer)
            ++s.abstained;
        else if (*answer == item.gold)
            ++s.correct;
    }
    if (!missing.empty()) throw MissingPredictionsError("benchmark items have no prediction", std::move(missing));
    for (const auto& p : predictions)
        if (!benchmark_ids.contains(p.item_id))
            throw PreconditionError("prediction for unknown item '" + p.item_id + "'");

    std::vector<double> accuracies;
    std::size_t total = 0, correct = 0;
    for (auto& [subset, s] : report.subsets) {
        s.accuracy = 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.total);
        accuracies.push_back(s.accuracy);
        total += s.total;
        correct += s.correct;
        report.abstained += s.abstained;
    }
    report.unweighted_average = unweighted_average(accuracies);
    if (total > 0) {
        report.weighted_average = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
        report.abstention_rate = 100.0 * static_cast<double>(report.abstained) / static_cast<double>(total);
    }
    return report;
}

json to_json(const McqReport& r) {
    json subsets = json::object();
    for (const auto& [subset, s] : r.subsets)
        subsets[std::string(to_string(subset))] = {{"total", s.total},
                                                   {"correct", s.correct},
                                                   {"abstained", s.abstained},
                                                   {"accuracy", s.accuracy}};
    return json{{"subsets", subsets},
                {"average", r.average()},
                {"averaging", r.averaging == Averaging::unweighted ? "unweighted" : "weighted"},
                {"unweighted_average", r.unweighted_average},
                {"weighted_average", r.weighted_average},
                {"abstained", r.abstained},
                {"abstention_rate", r.abstention_rate}};
}

std::string render_table(const McqReport& r, const std::string& label) {
    std::ostringstream head, row;
    auto cell = [](std::ostringstream& os, const std::string& text, std::size_t width) {
        os << text;
        for (auto n = text.size(); n < width; ++n) os << ' ';
    };
    cell(head, "run", 16);
    cell(row, label, 16);
    for (const auto& [subset, s] : r.subsets) {
        std::string name(to_string(subset));
        auto width = std::max<std::size_t>(name.size(), 7) + 2;
        cell(head, name, width);
        cell(row, format_half_up(s.accuracy, 2), width);
    }
    cell(head, "average", 9);
    cell(row, format_half_up(r.average(), 2), 9);
    head << "abstained";
    row << format_half_up(r.abstention_rate, 2) << "%";
    return head.str() + "\n" + row.str() + "\n";
}

} // namespace forge::mcq
