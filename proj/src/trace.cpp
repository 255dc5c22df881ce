#include "dive/trace.hpp"

#include "dive/errors.hpp"

#include <fstream>

namespace dive {

namespace {

constexpr std::string_view kStepNames[] = {"intent", "breakdown", "answer", "refine",
                                           "continue_judgment", "final", "summarize", "judge"};

} // namespace

std::string_view to_string(TraceStep s) {
    return kStepNames[static_cast<int>(s)];
}

TraceStep trace_step_from_string(std::string_view s) {
    for (int i = 0; i < static_cast<int>(std::size(kStepNames)); ++i) {
        if (kStepNames[i] == s) {
            return static_cast<TraceStep>(i);
        }
    }
    throw ValidationError("trace: unknown step '" + std::string(s) + "'");
}

nlohmann::json TraceEvent::to_json() const {
    nlohmann::json j = {
        {"seq", seq},
        {"step", to_string(step)},
        {"actor", actor},
        {"input_digest", input_digest},
        {"output", output},
        {"started_at", started_at},
        {"ended_at", ended_at},
        {"token_usage", token_usage ? nlohmann::json{{"prompt", token_usage->prompt},
                                                      {"completion", token_usage->completion}}
                                    : nlohmann::json(nullptr)},
    };
    if (error) {
        j["error"] = *error;
    }
    if (ledger) {
        j["ledger"] = *ledger;
    }
    return j;
}

TraceEvent TraceEvent::from_json(const nlohmann::json& j) {
    TraceEvent e;
    try {
        e.seq = j.at("seq").get<std::uint64_t>();
        e.step = trace_step_from_string(j.at("step").get<std::string>());
        e.actor = j.at("actor").get<std::string>();
        e.input_digest = j.at("input_digest").get<std::string>();
        e.output = j.at("output").get<std::string>();
        e.started_at = j.value("started_at", "");
        e.ended_at = j.value("ended_at", "");
        if (j.contains("token_usage") && !j["token_usage"].is_null()) {
            e.token_usage = TokenUsage{j["token_usage"].at("prompt").get<long>(),
                                       j["token_usage"].at("completion").get<long>()};
        }
        if (j.contains("error")) {
            e.error = j["error"].get<std::string>();
        }
        if (j.contains("ledger")) {
            e.ledger = j["ledger"];
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ValidationError(std::string("trace event: ") + ex.what());
    }
    return e;
}

TraceLog::TraceLog(std::filesystem::path path) : path_(std::move(path)) {
    if (!path_.empty()) {
        if (path_.has_parent_path()) {
            std::filesystem::create_directories(path_.parent_path());
        }
        std::ofstream truncate(path_, std::ios::trunc);
        if (!truncate) {
            throw Error("cannot create trace file: " + path_.string());
        }
    }
}

std::uint64_t TraceLog::append(TraceEvent event) {
    std::lock_guard lock(mutex_);
    event.seq = events_.size();
    if (!path_.empty()) {
        std::ofstream out(path_, std::ios::app);
        out << event.to_json().dump() << '\n';
    }
    events_.push_back(std::move(event));
    return events_.back().seq;
}

void TraceLog::attach_ledger(const nlohmann::json& snapshot) {
    std::lock_guard lock(mutex_);
    if (events_.empty()) {
        throw Error("trace: no event to attach a ledger snapshot to");
    }
    events_.back().ledger = snapshot;
    rewrite_file();
}

void TraceLog::rewrite_file() const {
    if (path_.empty()) {
        return;
    }
    std::ofstream out(path_, std::ios::trunc);
    for (const auto& e : events_) {
        out << e.to_json().dump() << '\n';
    }
}

std::vector<TraceEvent> TraceLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open trace: " + path.string());
    }
    std::vector<TraceEvent> events;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            events.push_back(TraceEvent::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return events;
}

std::vector<TraceStep> step_sequence(const std::vector<TraceEvent>& events) {
    std::vector<TraceStep> steps;
    for (const auto& e : events) {
        if (steps.empty() || steps.back() != e.step) {
            steps.push_back(e.step);
        }
    }
    return steps;
}

std::string trace_payload(const std::vector<TraceEvent>& events) {
    std::string out;
    for (const auto& e : events) {
        auto j = e.to_json();
        j.erase("started_at");
        j.erase("ended_at");
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace dive
