#include "dive/bench.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"
#include "dive/pipeline.hpp"
#include "dive/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

namespace dive {

nlohmann::json Verdict::to_json() const {
    return {{"item_id", item_id}, {"correct", correct}, {"judge_rationale", judge_rationale}, {"predicted", predicted}};
}

double percent_half_up(long correct, long total) {
    if (total <= 0) {
        return 0.0;
    }
    // hundredths of a percent, half-up: floor((10000*c)/t + 1/2)
    const long long hundredths = (20000LL * correct + total) / (2LL * total);
    return static_cast<double>(hundredths) / 100.0;
}

nlohmann::json AccuracyReport::to_json() const {
    nlohmann::json cats = nlohmann::json::object();
    for (const auto& [name, s] : per_category) {
        cats[name] = {{"correct", s.correct}, {"total", s.total}, {"pct", s.pct}};
    }
    return {{"overall_pct", overall_pct}, {"n_items", n_items}, {"n_correct", n_correct}, {"per_category", cats}};
}

std::string AccuracyReport::to_table() const {
    std::size_t width = 8;
    for (const auto& [name, _] : per_category) {
        width = std::max(width, name.size());
    }
    std::string out = fmt::format("{:<{}}  {:>7}  {:>5}  {:>7}\n", "category", width, "correct", "total", "acc(%)");
    for (const auto& [name, s] : per_category) {
        out += fmt::format("{:<{}}  {:>7}  {:>5}  {:>7.2f}\n", name, width, s.correct, s.total, s.pct);
    }
    out += fmt::format("{:<{}}  {:>7}  {:>5}  {:>7.2f}\n", "overall", width, n_correct, n_items, overall_pct);
    return out;
}

std::vector<QAItem> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open dataset: " + path.string());
    }
    std::vector<QAItem> items;
    std::set<std::string> ids;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto where = fmt::format("{}:{}: ", path.string(), lineno);
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw ValidationError(where + "not a JSON object");
        }
        auto field = [&](const char* name) {
            if (!j.contains(name) || !j[name].is_string()) {
                throw ValidationError(where + "missing string field '" + name + "'");
            }
            auto v = j[name].get<std::string>();
            if (v.find_first_not_of(" \t\r\n") == std::string::npos) {
                throw ValidationError(where + "empty field '" + name + "'");
            }
            return v;
        };
        QAItem item{field("item_id"), field("video_id"), field("question"), field("reference_answer"),
                    field("category")};
        if (!ids.insert(item.item_id).second) {
            throw ValidationError(where + "duplicate item_id '" + item.item_id + "'");
        }
        items.push_back(std::move(item));
    }
    if (items.empty()) {
        throw ValidationError("dataset is empty: " + path.string());
    }
    return items;
}

Verdict parse_judge_reply(const std::string& item_id, const std::string& predicted, std::string_view reply) {
    Verdict v{item_id, false, "unparseable judge output", predicted};
    const auto b = reply.find_first_not_of(" \t\r\n*");
    if (b == std::string_view::npos) {
        return v;
    }
    auto body = reply.substr(b);
    auto take = [&](std::string_view token) -> bool {
        if (body.substr(0, token.size()) != token) {
            return false;
        }
        auto rest = body.substr(token.size());
        if (!rest.empty() && rest.front() != ':' && rest.front() != ' ' && rest.front() != '\n' &&
            rest.front() != '.' && rest.front() != '*') {
            return false;
        }
        const auto start = rest.find_first_not_of(" :.*\t\r\n");
        auto rationale = start == std::string_view::npos ? std::string_view{} : rest.substr(start);
        const auto end = rationale.find_last_not_of(" \t\r\n");
        v.judge_rationale = end == std::string_view::npos ? "" : std::string(rationale.substr(0, end + 1));
        return true;
    };
    if (take("INCORRECT")) {
        v.correct = false;
    } else if (take("CORRECT")) {
        v.correct = true;
    }
    return v;
}

Verdict judge_answer(const QAItem& item, const std::string& predicted, ChatClient& client, const PipelineConfig& config,
                     TraceLog* trace) {
    if (predicted.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ArgumentError("judge_answer: empty prediction for " + item.item_id);
    }
    CompletionRequest req;
    req.backend_id = config.judge_backend;
    req.role_temperature = config.agent_temperature;
    req.max_output = config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageJudge) + " " + std::string(prompts::kJudgeInstructions)},
        {Role::user, fmt::format("Question: {}\nReference answer: {}\nPredicted answer: {}", item.question,
                                 item.reference_answer, predicted)},
    };
    const auto reply = traced_complete(client, req, trace, TraceStep::judge).text;
    return parse_judge_reply(item.item_id, predicted, reply);
}

AccuracyReport compute_accuracy(const std::vector<Verdict>& verdicts, const std::vector<QAItem>& items) {
    if (verdicts.size() != items.size()) {
        throw ArgumentError(fmt::format("compute_accuracy: {} verdicts for {} items", verdicts.size(), items.size()));
    }
    std::map<std::string, const Verdict*> by_id;
    for (const auto& v : verdicts) {
        if (!by_id.emplace(v.item_id, &v).second) {
            throw ArgumentError("compute_accuracy: duplicate verdict for " + v.item_id);
        }
    }
    AccuracyReport report;
    for (const auto& item : items) {
        auto it = by_id.find(item.item_id);
        if (it == by_id.end()) {
            throw ArgumentError("compute_accuracy: no verdict for " + item.item_id);
        }
        auto& cat = report.per_category[item.category];
        ++cat.total;
        ++report.n_items;
        if (it->second->correct) {
            ++cat.correct;
            ++report.n_correct;
        }
    }
    for (auto& [_, cat] : report.per_category) {
        cat.pct = percent_half_up(cat.correct, cat.total);
    }
    report.overall_pct = percent_half_up(report.n_correct, report.n_items);
    return report;
}

std::filesystem::path manifest_path_for(const BenchOptions& options, const std::string& video_id) {
    return options.videos_dir / video_id / "manifest.json";
}

BenchResult run_benchmark(const std::vector<QAItem>& items, const PipelineConfig& config, ChatClient& client,
                          DetectorClient& detector, const BenchOptions& options) {
    if (items.empty()) {
        throw ValidationError("benchmark: empty dataset");
    }
    config.validate();
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
    }

    std::vector<Verdict> verdicts(items.size());
    std::atomic<std::size_t> next{0};
    auto run_item = [&](const QAItem& item) -> Verdict {
        std::string predicted;
        try {
            auto manifest = std::make_shared<const VideoManifest>(
                load_manifest(manifest_path_for(options, item.video_id)));
            Task task{item.item_id, manifest, item.question, item.category};
            predicted = run_pipeline(task, config, PipelineServices{client, detector}).final_answer;
        } catch (const std::exception& e) {
            spdlog::warn("item {} failed: {}", item.item_id, e.what());
            return Verdict{item.item_id, false, std::string("pipeline failure: ") + e.what(), ""};
        }
        try {
            std::unique_ptr<TraceLog> judge_trace;
            if (!config.trace_dir.empty()) {
                judge_trace = std::make_unique<TraceLog>(config.trace_dir / (item.item_id + ".judge.trace.jsonl"));
            }
            return judge_answer(item, predicted, client, config, judge_trace.get());
        } catch (const std::exception& e) {
            spdlog::warn("item {} judge failed: {}", item.item_id, e.what());
            return Verdict{item.item_id, false, std::string("judge failure: ") + e.what(), predicted};
        }
    };
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < items.size(); i = next.fetch_add(1)) {
            verdicts[i] = run_item(items[i]);
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(config.parallel_tasks), items.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    BenchResult result{compute_accuracy(verdicts, items), std::move(verdicts)};
    if (!options.out_dir.empty()) {
        std::string lines;
        for (const auto& v : result.verdicts) {
            lines += v.to_json().dump() + "\n";
        }
        write_file_atomic(options.out_dir / "verdicts.jsonl", lines);
        write_file_atomic(options.out_dir / "report.json", result.report.to_json().dump(2) + "\n");
    }
    return result;
}

} // namespace dive
