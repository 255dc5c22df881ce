#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dive {

enum class TraceStep { intent, breakdown, answer, refine, continue_judgment, final, summarize, judge };

std::string_view to_string(TraceStep s);
TraceStep trace_step_from_string(std::string_view s);

struct TokenUsage {
    long prompt = 0;
    long completion = 0;
    bool operator==(const TokenUsage&) const = default;
};

struct TraceEvent {
    std::uint64_t seq = 0;
    TraceStep step = TraceStep::intent;
    std::string actor;
    std::string input_digest;
    std::string output;
    std::string started_at;
    std::string ended_at;
    std::optional<TokenUsage> token_usage;
    std::optional<std::string> error;
    std::optional<nlohmann::json> ledger;  // snapshot after the step, when it changed the ledger

    nlohmann::json to_json() const;
    static TraceEvent from_json(const nlohmann::json& j);
};

// Append-only event log for one pipeline run. seq is assigned here and is
// gapless from 0. When a path is given every event is written through as one
// JSON line immediately, so an aborted run still leaves a readable trace.
class TraceLog {
public:
    TraceLog() = default;
    explicit TraceLog(std::filesystem::path path);

    TraceLog(const TraceLog&) = delete;
    TraceLog& operator=(const TraceLog&) = delete;

    /// Assigns seq (ignoring any value already set) and returns it.
    std::uint64_t append(TraceEvent event);

    /// Attaches a ledger snapshot to the most recent event and rewrites it.
    void attach_ledger(const nlohmann::json& snapshot);

    std::vector<TraceEvent> events() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void rewrite_file() const;

    mutable std::mutex mutex_;
    std::filesystem::path path_;
    std::vector<TraceEvent> events_;
};

std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

/// Step tags with consecutive repeats collapsed: the coarse step sequence of a run.
std::vector<TraceStep> step_sequence(const std::vector<TraceEvent>& events);

/// Trace serialized with timestamps removed; equal strings mean replay-identical runs.
std::string trace_payload(const std::vector<TraceEvent>& events);

} // namespace dive
