#pragma once

#include "dive/backend.hpp"
#include "dive/config.hpp"
#include "dive/detector.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dive {

struct QAItem {
    std::string item_id;
    std::string video_id;
    std::string question;
    std::string reference_answer;
    std::string category;
};

struct Verdict {
    std::string item_id;
    bool correct = false;
    std::string judge_rationale;
    std::string predicted;

    nlohmann::json to_json() const;
    bool operator==(const Verdict&) const = default;
};

struct CategoryScore {
    long correct = 0;
    long total = 0;
    double pct = 0.0;
    bool operator==(const CategoryScore&) const = default;
};

struct AccuracyReport {
    double overall_pct = 0.0;
    long n_items = 0;
    long n_correct = 0;
    std::map<std::string, CategoryScore> per_category;

    nlohmann::json to_json() const;
    /// Fixed-width table, one row per category plus an overall row.
    std::string to_table() const;
    bool operator==(const AccuracyReport&) const = default;
};

/// 100*correct/total rounded half-up to two decimals, computed in integers.
double percent_half_up(long correct, long total);

/// JSON lines with item_id, video_id, question, reference_answer, category.
/// Rejects empty files, missing or empty fields, and duplicate ids.
std::vector<QAItem> load_dataset(const std::filesystem::path& path);

/// Parses "CORRECT: ..." / "INCORRECT: ..."; anything else is incorrect.
Verdict parse_judge_reply(const std::string& item_id, const std::string& predicted, std::string_view reply);

Verdict judge_answer(const QAItem& item, const std::string& predicted, ChatClient& client, const PipelineConfig& config,
                     TraceLog* trace = nullptr);

AccuracyReport compute_accuracy(const std::vector<Verdict>& verdicts, const std::vector<QAItem>& items);

struct BenchOptions {
    std::filesystem::path videos_dir;  // manifests at <videos_dir>/<video_id>/manifest.json
    std::filesystem::path out_dir;     // verdicts.jsonl, report.json, judge traces
};

struct BenchResult {
    AccuracyReport report;
    std::vector<Verdict> verdicts;  // dataset order
};

/// Path of the manifest a dataset item refers to.
std::filesystem::path manifest_path_for(const BenchOptions& options, const std::string& video_id);

/// Runs the pipeline and the judge for each item, up to config.parallel_tasks
/// at a time. A failing item is scored incorrect with the failure as rationale.
BenchResult run_benchmark(const std::vector<QAItem>& items, const PipelineConfig& config, ChatClient& client,
                          DetectorClient& detector, const BenchOptions& options);

} // namespace dive
