#include <charconv>
#include <set>

#include "forge/common/jsonl.hpp"
#include "forge/common/text.hpp"
#include "forge/pipeline/pipeline.hpp"

namespace forge::pipeline {

namespace fs = std::filesystem;

TrainStageConfig train_config(int stage) {
    switch (stage) {
    case 1: return {1, 24, 1e-5, "adamw", 1, 2048, 1800, 0.0};
    case 2: return {2, 8, 5e-6, "adamw", 1, 2048, 0, 0.0};
    default: throw PreconditionError("no training stage " + std::to_string(stage));
    }
}

namespace {

template <class T>
std::string number(T v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <class T>
T parse_number(std::string_view s, std::size_t line, std::string_view key) {
    T v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size())
        throw ParseError(line, "bad value '" + std::string(s) + "' for " + std::string(key));
    return v;
}

constexpr std::string_view kKeys[] = {"stage",        "global_batch_size", "learning_rate", "optimizer",
                                      "epochs",       "max_seq_len",       "warmup_steps",  "weight_decay"};

} // namespace

std::string render_train_config(const TrainStageConfig& c) {
    std::string out;
    auto line = [&](std::string_view k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
    line("stage", number(c.stage));
    line("global_batch_size", number(c.global_batch_size));
    line("learning_rate", number(c.learning_rate));
    line("optimizer", c.optimizer);
    line("epochs", number(c.epochs));
    line("max_seq_len", number(c.max_seq_len));
    line("warmup_steps", number(c.warmup_steps));
    line("weight_decay", number(c.weight_decay));
    return out;
}

TrainStageConfig parse_train_config(std::string_view text) {
    TrainStageConfig c;
    std::set<std::string> seen;
    std::size_t n = 0;
    for (const auto& raw : split_lines(text)) {
        ++n;
        auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(n, "expected key = value");
        auto key = std::string(trim(line.substr(0, eq)));
        auto value = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ParseError(n, "repeated key " + key);
        if (key == "stage") c.stage = parse_number<int>(value, n, key);
        else if (key == "global_batch_size") c.global_batch_size = parse_number<int>(value, n, key);
        else if (key == "learning_rate") c.learning_rate = parse_number<double>(value, n, key);
        else if (key == "optimizer") c.optimizer = std::string(value);
        else if (key == "epochs") c.epochs = parse_number<int>(value, n, key);
        else if (key == "max_seq_len") c.max_seq_len = parse_number<int>(value, n, key);
        else if (key == "warmup_steps") c.warmup_steps = parse_number<int>(value, n, key);
        else if (key == "weight_decay") c.weight_decay = parse_number<double>(value, n, key);
        else throw ParseError(n, "unknown key " + key);
    }
    for (auto k : kKeys)
        if (!seen.contains(std::string(k))) throw ParseError(n, "missing key " + std::string(k));
    try {
        validate_train_config(c);
    } catch (const Error& e) {
        throw ParseError(n, e.what());
    }
    return c;
}

fs::path emit_train_config(int stage, const fs::path& out_dir) {
    auto c = train_config(stage);
    fs::create_directories(out_dir);
    auto path = out_dir / ("train_stage" + std::to_string(stage) + ".conf");
    write_text_atomic(path, render_train_config(c));
    return path;
}

TrainStageConfig read_train_config(const fs::path& path) { return parse_train_config(read_text_file(path)); }

} // namespace forge::pipeline
