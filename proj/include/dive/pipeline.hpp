#pragma once

#include "dive/backend.hpp"
#include "dive/config.hpp"
#include "dive/detector.hpp"
#include "dive/ledger.hpp"
#include "dive/summarizer.hpp"
#include "dive/tools.hpp"
#include "dive/trace.hpp"
#include "dive/video.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dive {

struct Task {
    std::string task_id;
    std::shared_ptr<const VideoManifest> video;
    std::string question;
    std::optional<std::string> category;

    /// Throws ValidationError for an empty id or question, or a missing video.
    void validate() const;
};

struct IntentEstimate {
    std::string text;
};

// Same shape as the tool context: client, config, trace sink.
using StepContext = ToolContext;

IntentEstimate estimate_intent(const Task& task, const VideoSummary& summary, const StepContext& ctx);

/// Lines of the form "SUBQ <priority>: <text>" (priority optional, default 0).
/// Other lines are ignored. At most `cap` items are kept.
std::vector<DraftSubQuestion> parse_breakdown(std::string_view reply, int cap);

SubQuestionLedger breakdown_question(const Task& task, const VideoSummary& summary, const IntentEstimate& intent,
                                     const std::vector<std::string_view>& tool_descriptions, const StepContext& ctx);

struct AnswerOutcome {
    SubQuestionLedger ledger;
    std::string sq_id;
    std::optional<ToolAnswer> answer;    // set on success
    std::optional<std::string> failure;  // set when the tool failed and the item was retired
};

/// Answers the highest-priority pending item with one tool call.
AnswerOutcome answer_step(const SubQuestionLedger& ledger, const VideoManifest& manifest, const VideoSummary& summary,
                          const StepContext& ctx);

/// Parses refinement lines: "ADD <priority>: <text>", "REPRIORITIZE <sq_id> <priority>",
/// "RETIRE <sq_id>", or "NO_CHANGES". Returns nullopt when nothing parses.
std::optional<std::vector<RefinementAction>> parse_refinement(std::string_view reply);

SubQuestionLedger refine_subquestions(const Task& task, const SubQuestionLedger& ledger, const std::string& last_answer,
                                      int round, const StepContext& ctx);

struct ContinuationDecision {
    bool proceed = false;
    std::optional<StopReason> stop_reason;  // set iff !proceed
};

ContinuationDecision judge_continuation(const SubQuestionLedger& ledger, const Task& task, const LoopState& loop,
                                        const StepContext& ctx);

std::string generate_final_answer(const Task& task, const SubQuestionLedger& ledger, const VideoSummary& summary,
                                  const StepContext& ctx);

struct PipelineServices {
    ChatClient& client;
    DetectorClient& detector;
};

struct PipelineResult {
    std::string final_answer;
    SubQuestionLedger ledger;
    LoopState loop;
    std::filesystem::path trace_path;  // empty when no trace_dir is configured
    std::vector<TraceEvent> trace;
    VideoSummary summary;
    IntentEstimate intent;
};

/// summarize -> intent -> breakdown -> {answer -> refine -> continue}* -> final.
/// Failures before the loop or in the final step throw PipelineError.
PipelineResult run_pipeline(const Task& task, const PipelineConfig& config, const PipelineServices& services);

} // namespace dive
