#include "dive/pipeline.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"
#include "dive/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <regex>
#include <set>
#include <sstream>

namespace dive {

void Task::validate() const {
    if (task_id.empty()) {
        throw ValidationError("task: empty task_id");
    }
    if (question.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ValidationError("task " + task_id + ": empty question");
    }
    if (!video) {
        throw ValidationError("task " + task_id + ": video not resolved");
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

int parse_priority(const std::string& s) {
    int value = 0;
    if (s.empty() || std::from_chars(s.data(), s.data() + s.size(), value).ec != std::errc{}) {
        return 0;
    }
    return value;
}

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        out.push_back(trim(line));
    }
    return out;
}

CompletionRequest agent_request(const StepContext& ctx, std::string system, std::string user) {
    CompletionRequest req;
    req.backend_id = ctx.config.agent_backend;
    req.role_temperature = ctx.config.agent_temperature;
    req.max_output = ctx.config.max_output;
    req.messages = {{Role::system, std::move(system)}, {Role::user, std::move(user)}};
    return req;
}

std::string render_answered(const SubQuestionLedger& ledger) {
    std::string out;
    for (const auto& q : ledger.answered()) {
        out += fmt::format("- Q: {}\n  A: {}\n", q.text, *q.answer);
    }
    return out.empty() ? "(none)\n" : out;
}

std::string render_pending(const SubQuestionLedger& ledger) {
    std::string out;
    for (const auto& q : ledger.pending()) {
        out += fmt::format("- {} (priority {}): {}\n", q.sq_id, q.priority, q.text);
    }
    return out.empty() ? "(none)\n" : out;
}

void record_decision(TraceLog* trace, TraceStep step, const std::string& material, const std::string& output) {
    if (trace == nullptr) {
        return;
    }
    TraceEvent e;
    e.step = step;
    e.actor = "orchestrator";
    e.input_digest = sha256_hex(material);
    e.output = output;
    e.started_at = e.ended_at = utc_now_iso();
    trace->append(std::move(e));
}

void snapshot(TraceLog* trace, const SubQuestionLedger& ledger) {
    if (trace != nullptr) {
        trace->attach_ledger(ledger.to_json());
    }
}

} // namespace

IntentEstimate estimate_intent(const Task& task, const VideoSummary& summary, const StepContext& ctx) {
    auto req = agent_request(
        ctx,
        std::string(prompts::kStageIntent) +
            " You analyze questions about videos. Before anything is answered, work out what the question is "
            "fundamentally asking.",
        fmt::format("Video summary:\n{}\n\nQuestion: {}\n\nDescribe in detail the underlying intent of this "
                    "question: what it is really asking, what would count as a good answer, and any traps or "
                    "presuppositions it contains.",
                    summary.text, task.question));
    auto text = traced_complete(ctx.client, req, ctx.trace, TraceStep::intent).text;
    if (trim(text).empty()) {
        throw StepFailure("intent", "empty reply");
    }
    return IntentEstimate{std::move(text)};
}

std::vector<DraftSubQuestion> parse_breakdown(std::string_view reply, int cap) {
    static const std::regex kLine(R"(^SUBQ(?:\s+(-?\d+))?\s*:\s*(.*\S)\s*$)");
    std::vector<DraftSubQuestion> out;
    for (const auto& line : lines_of(reply)) {
        std::smatch m;
        if (!std::regex_match(line, m, kLine)) {
            continue;
        }
        if (static_cast<int>(out.size()) >= cap) {
            break;
        }
        out.push_back(DraftSubQuestion{m[2].str(), parse_priority(m[1].str())});
    }
    return out;
}

SubQuestionLedger breakdown_question(const Task& task, const VideoSummary& summary, const IntentEstimate& intent,
                                     const std::vector<std::string_view>& tool_descriptions, const StepContext& ctx) {
    if (tool_descriptions.empty()) {
        throw ArgumentError("breakdown: no tool descriptions");
    }
    std::string tools;
    for (const auto& d : tool_descriptions) {
        tools += "- " + std::string(d) + "\n";
    }
    auto req = agent_request(
        ctx,
        std::string(prompts::kStageBreakdown) +
            " You decompose questions about videos into focused sub-questions that an agent can answer with its "
            "video analysis tools.\nThe agent's tools:\n" + tools,
        fmt::format("Video summary:\n{}\n\nQuestion: {}\n\nIntent of the question:\n{}\n\n"
                    "Break the question into at most {} sub-questions, each answerable with one of the tools. "
                    "Write one per line as\nSUBQ <priority>: <sub-question>\nwhere a higher integer priority "
                    "means it should be answered sooner.",
                    summary.text, task.question, intent.text, ctx.config.max_subquestions));
    const auto reply = traced_complete(ctx.client, req, ctx.trace, TraceStep::breakdown).text;
    const auto drafts = parse_breakdown(reply, ctx.config.max_subquestions);
    if (drafts.empty()) {
        throw StepFailure("breakdown", "no parseable sub-questions in reply");
    }
    auto ledger = SubQuestionLedger::from_breakdown(drafts);
    snapshot(ctx.trace, ledger);
    return ledger;
}

AnswerOutcome answer_step(const SubQuestionLedger& ledger, const VideoManifest& manifest, const VideoSummary& summary,
                          const StepContext& ctx) {
    const auto next = ledger_select_next(ledger);
    if (!next) {
        throw ArgumentError("answer_step: no pending sub-question");
    }
    AnswerOutcome outcome{ledger, next->sq_id, std::nullopt, std::nullopt};
    const auto tool = select_tool(*next, ctx);
    try {
        auto answer = run_tool(tool, *next, summary, manifest, ctx);
        outcome.ledger = ledger_record_answer(ledger, next->sq_id, answer.text, std::string(to_string(answer.tool_id)));
        outcome.answer = std::move(answer);
    } catch (const Error& e) {
        spdlog::warn("sub-question {} retired after tool failure: {}", next->sq_id, e.what());
        outcome.failure = std::string("tool failure: ") + e.what();
        outcome.ledger = ledger_retire_failed(ledger, next->sq_id, *outcome.failure);
    }
    snapshot(ctx.trace, outcome.ledger);
    return outcome;
}

std::optional<std::vector<RefinementAction>> parse_refinement(std::string_view reply) {
    static const std::regex kAdd(R"(^ADD(?:\s+(-?\d+))?\s*:\s*(.*\S)\s*$)");
    static const std::regex kReprioritize(R"(^REPRIORITIZE\s+(\S+)\s+(-?\d+)$)");
    static const std::regex kRetire(R"(^RETIRE\s+(\S+)$)");
    std::vector<RefinementAction> actions;
    bool recognized = false;
    for (const auto& line : lines_of(reply)) {
        std::smatch m;
        if (line == "NO_CHANGES") {
            recognized = true;
        } else if (std::regex_match(line, m, kAdd)) {
            actions.emplace_back(refine::Add{m[2].str(), parse_priority(m[1].str())});
        } else if (std::regex_match(line, m, kReprioritize)) {
            actions.emplace_back(refine::Reprioritize{m[1].str(), parse_priority(m[2].str())});
        } else if (std::regex_match(line, m, kRetire)) {
            actions.emplace_back(refine::Retire{m[1].str()});
        }
    }
    if (actions.empty() && !recognized) {
        return std::nullopt;
    }
    return actions;
}

SubQuestionLedger refine_subquestions(const Task& task, const SubQuestionLedger& ledger, const std::string& last_answer,
                                      int round, const StepContext& ctx) {
    auto req = agent_request(
        ctx,
        std::string(prompts::kStageRefine) +
            " You maintain the list of open sub-questions for a video question answering agent. After each "
            "answer you may add follow-up sub-questions (for example to re-confirm a negative finding), change "
            "priorities, or retire sub-questions that are no longer useful.",
        fmt::format("Original question: {}\n\nAnswers so far:\n{}\nLatest answer:\n{}\n\nOpen sub-questions:\n{}\n"
                    "Reply with one action per line:\nADD <priority>: <new sub-question>\n"
                    "REPRIORITIZE <sq_id> <priority>\nRETIRE <sq_id>\nor the single line NO_CHANGES.",
                    task.question, render_answered(ledger), last_answer, render_pending(ledger)));
    std::string reply;
    try {
        reply = traced_complete(ctx.client, req, ctx.trace, TraceStep::refine).text;
    } catch (const Error& e) {
        spdlog::warn("refinement skipped: {}", e.what());
        return ledger;
    }
    const auto parsed = parse_refinement(reply);
    if (!parsed) {
        return ledger;
    }

    // Keep only actions the ledger accepts: adds up to the cap, and
    // reprioritize/retire aimed at items still pending at that point.
    std::vector<RefinementAction> accepted;
    std::set<std::string> retired;
    int adds = 0;
    for (const auto& action : *parsed) {
        if (const auto* add = std::get_if<refine::Add>(&action)) {
            if (adds < ctx.config.max_refinement_adds) {
                accepted.push_back(*add);
                ++adds;
            }
            continue;
        }
        const auto& id = std::holds_alternative<refine::Retire>(action) ? std::get<refine::Retire>(action).sq_id
                                                                         : std::get<refine::Reprioritize>(action).sq_id;
        const auto* item = ledger.find(id);
        if (item == nullptr || !item->is_pending() || retired.count(id) != 0) {
            continue;
        }
        if (std::holds_alternative<refine::Retire>(action)) {
            retired.insert(id);
        }
        accepted.push_back(action);
    }
    auto next = ledger_apply_refinement(ledger, accepted, round);
    snapshot(ctx.trace, next);
    return next;
}

ContinuationDecision judge_continuation(const SubQuestionLedger& ledger, const Task& task, const LoopState& loop,
                                        const StepContext& ctx) {
    const auto material = fmt::format("{}|{}|{}|{}", task.task_id, loop.round, loop.max_rounds, ledger.version());
    if (loop.round >= loop.max_rounds) {
        record_decision(ctx.trace, TraceStep::continue_judgment, material, "STOP budget_exhausted");
        return {false, StopReason::budget_exhausted};
    }
    if (ledger.pending_count() == 0) {
        record_decision(ctx.trace, TraceStep::continue_judgment, material, "STOP no_pending");
        return {false, StopReason::no_pending};
    }
    auto req = agent_request(
        ctx,
        std::string(prompts::kStageContinue) +
            " You decide whether a video question answering agent needs more information. Stop as soon as the "
            "answers gathered are enough to answer the original question confidently; over-analysis hurts "
            "answer quality.",
        fmt::format("Original question: {}\n\nAnswers so far:\n{}\nOpen sub-questions:\n{}\n"
                    "Reply with exactly one token: CONTINUE or STOP.",
                    task.question, render_answered(ledger), render_pending(ledger)));
    std::string reply;
    try {
        reply = traced_complete(ctx.client, req, ctx.trace, TraceStep::continue_judgment).text;
    } catch (const Error& e) {
        spdlog::warn("continuation judgment failed, stopping: {}", e.what());
        return {false, StopReason::sufficient};
    }
    if (trim(reply) == "CONTINUE") {
        return {true, std::nullopt};
    }
    return {false, StopReason::sufficient};
}

std::string generate_final_answer(const Task& task, const SubQuestionLedger& ledger, const VideoSummary& summary,
                                  const StepContext& ctx) {
    auto req = agent_request(
        ctx,
        std::string(prompts::kStageFinal) +
            " You write the final answer to a question about a video, combining the answers to its sub-questions "
            "with the video summary.",
        fmt::format("Question: {}\n\nSub-questions and answers:\n{}\nVideo summary:\n{}\n\n"
                    "Write a precise, complete answer to the question.",
                    task.question, render_answered(ledger), summary.text));
    auto text = traced_complete(ctx.client, req, ctx.trace, TraceStep::final).text;
    if (trim(text).empty()) {
        throw StepFailure("final", "empty reply");
    }
    return text;
}

PipelineResult run_pipeline(const Task& task, const PipelineConfig& config, const PipelineServices& services) {
    task.validate();
    config.validate();
    const auto trace_path =
        config.trace_dir.empty() ? std::filesystem::path{} : config.trace_dir / (task.task_id + ".trace.jsonl");
    TraceLog trace(trace_path);
    const StepContext ctx{services.client, config, &trace};
    const auto& video = *task.video;

    auto abort = [&](const char* stage, const std::exception& e) -> PipelineError {
        return PipelineError(fmt::format("task {}: {} failed: {}", task.task_id, stage, e.what()), trace_path.string());
    };

    PipelineResult result;
    result.trace_path = trace_path;
    try {
        result.summary = summarize_video(video, services.client, services.detector, config, &trace);
    } catch (const Error& e) {
        throw abort("summarize", e);
    }
    try {
        result.intent = estimate_intent(task, result.summary, ctx);
    } catch (const Error& e) {
        throw abort("intent estimation", e);
    }
    SubQuestionLedger ledger;
    try {
        ledger = breakdown_question(
            task, result.summary, result.intent,
            {prompts::kWholeVideoToolDescription, prompts::kKeySegmentsToolDescription}, ctx);
    } catch (const Error& e) {
        throw abort("question breakdown", e);
    }

    LoopState loop;
    loop.max_rounds = config.max_rounds;
    while (!loop.terminated()) {
        auto outcome = answer_step(ledger, video, result.summary, ctx);
        ++loop.round;
        ledger = std::move(outcome.ledger);
        if (ledger.pending_count() > 0) {
            const auto last = outcome.answer ? outcome.answer->text : *outcome.failure;
            ledger = refine_subquestions(task, ledger, last, loop.round, ctx);
        }
        const auto decision = judge_continuation(ledger, task, loop, ctx);
        if (!decision.proceed) {
            loop.stop_reason = decision.stop_reason;
        }
    }
    spdlog::debug("task {}: loop stopped after {} rounds ({})", task.task_id, loop.round,
                  to_string(*loop.stop_reason));

    try {
        result.final_answer = generate_final_answer(task, ledger, result.summary, ctx);
    } catch (const Error& e) {
        throw abort("final answer", e);
    }
    result.ledger = std::move(ledger);
    result.loop = loop;
    result.trace = trace.events();
    return result;
}

} // namespace dive
