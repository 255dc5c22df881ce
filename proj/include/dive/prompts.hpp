#pragma once

#include <string_view>

// Prompt text shared by the pipeline stages. Each system prompt opens with a
// "[stage=...]" tag so logs, caches and scripted test doubles can tell the
// stages apart. Changing any wording here changes cache keys; bump
// kPromptVersion when doing so.
namespace dive::prompts {

inline constexpr std::string_view kPromptVersion = "dive-prompts/1";

inline constexpr std::string_view kStageObjectLabels = "[stage=object-labels]";
inline constexpr std::string_view kStageVideoSummary = "[stage=video-summary]";
inline constexpr std::string_view kStageIntent = "[stage=intent]";
inline constexpr std::string_view kStageBreakdown = "[stage=breakdown]";
inline constexpr std::string_view kStageToolSelect = "[stage=tool-select]";
inline constexpr std::string_view kStageWholeVideo = "[stage=whole-video]";
inline constexpr std::string_view kStageSegmentSelect = "[stage=segment-select]";
inline constexpr std::string_view kStageSegmentAnswer = "[stage=segment-answer]";
inline constexpr std::string_view kStageRefine = "[stage=refine]";
inline constexpr std::string_view kStageContinue = "[stage=continue]";
inline constexpr std::string_view kStageFinal = "[stage=final]";
inline constexpr std::string_view kStageJudge = "[stage=judge]";

// Tool descriptions, versioned with kPromptVersion.
inline constexpr std::string_view kWholeVideoToolDescription =
    "whole_video: analyzes the entire video at one frame per second together with its audio track. "
    "Strong at temporal reasoning, event ordering, counting over time and audio cues. Use it when the "
    "sub-question needs an overall understanding of the whole clip.";

inline constexpr std::string_view kKeySegmentsToolDescription =
    "key_segments: uses the sub-question and the video summary to pick the temporal segments of interest, "
    "samples 8-16 of the most relevant frames from them and inspects those frames in detail. Use it for "
    "fine-grained visual detail inside specific moments of the video.";

inline constexpr std::string_view kJudgeInstructions =
    "You are grading an answer to a question about a video. Compare the predicted answer with the "
    "reference answer. The prediction is correct when it conveys the same meaning as the reference, even "
    "if the wording differs; it is incorrect when it contradicts the reference, misses its key point or "
    "hedges between alternatives. Reply on one line starting with CORRECT or INCORRECT, then a colon and "
    "a one-sentence rationale.";

} // namespace dive::prompts
