#include "dive/tools.hpp"

#include "dive/errors.hpp"
#include "dive/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace dive {

std::string_view to_string(ToolId id) {
    return id == ToolId::whole_video ? "whole_video" : "key_segments";
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

void attach_frames(CompletionRequest& req, const std::vector<FrameRef>& frames) {
    for (const auto& f : frames) {
        req.attachments.push_back(Attachment{MediaKind::image, f.digest, f.path});
    }
}

std::vector<int> indices_of(const std::vector<FrameRef>& frames) {
    std::vector<int> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(f.index);
    }
    return out;
}

std::string call_tool(ToolId tool, const CompletionRequest& req, const ToolContext& ctx) {
    std::string text;
    try {
        text = traced_complete(ctx.client, req, ctx.trace, TraceStep::answer).text;
    } catch (const Error& e) {
        throw ToolError(std::string(to_string(tool)), e.what());
    }
    if (trim(text).empty()) {
        throw ToolError(std::string(to_string(tool)), "empty reply");
    }
    return text;
}

} // namespace

ToolAnswer whole_video_answer(const SubQuestion& subq, const VideoManifest& manifest, const ToolContext& ctx) {
    const auto frames = sample_one_fps(manifest);
    CompletionRequest req;
    req.backend_id = ctx.config.whole_video_backend;
    req.role_temperature = ctx.config.tool_temperature;
    req.max_output = ctx.config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageWholeVideo) +
                           " You answer questions about a video. You receive one frame per second of the whole "
                           "video in order, plus its audio track when available."},
        {Role::user, fmt::format("The video lasts {:.1f} s; {} frames (one per second) are attached{}.\n"
                                 "Question: {}\nAnswer precisely, citing times where relevant.",
                                 manifest.duration_s, frames.size(), manifest.audio ? " with the audio track" : "",
                                 subq.text)},
    };
    attach_frames(req, frames);
    if (manifest.audio) {
        req.attachments.push_back(Attachment{MediaKind::audio, manifest.audio->digest, manifest.audio->path});
    }
    ToolAnswer answer;
    answer.tool_id = ToolId::whole_video;
    answer.text = call_tool(ToolId::whole_video, req, ctx);
    answer.frames_used = indices_of(frames);
    return answer;
}

std::vector<Segment> parse_segments(std::string_view reply, double duration_s) {
    std::vector<Segment> out;
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        const auto parsed = nlohmann::json::parse(reply.substr(open, close - open + 1), nullptr, false);
        if (parsed.is_array()) {
            for (const auto& item : parsed) {
                if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
                    continue;
                }
                const double t0 = std::clamp(item[0].get<double>(), 0.0, duration_s);
                const double t1 = std::clamp(item[1].get<double>(), 0.0, duration_s);
                if (t1 > t0) {
                    out.emplace_back(t0, t1);
                }
            }
        }
    }
    if (out.empty()) {
        out.emplace_back(0.0, duration_s);
    }
    return out;
}

std::vector<Segment> select_key_segments(const SubQuestion& subq, const VideoSummary& summary,
                                         const VideoManifest& manifest, const ToolContext& ctx) {
    CompletionRequest req;
    req.backend_id = ctx.config.key_segments_backend;
    req.role_temperature = ctx.config.tool_temperature;
    req.max_output = ctx.config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageSegmentSelect) +
                           " You choose the time ranges of a video that matter for a question."},
        {Role::user,
         fmt::format("Video duration: {:.1f} s.\nVideo summary:\n{}\nObject timelines:\n{}\nQuestion: {}\n"
                     "Reply only with a JSON list of [start_seconds, end_seconds] pairs, for example "
                     "[[2.0, 4.5], [7.0, 9.0]].",
                     manifest.duration_s, summary.text, render_timeline_digest(summary.timelines, manifest),
                     subq.text)},
    };
    std::string reply;
    try {
        reply = traced_complete(ctx.client, req, ctx.trace, TraceStep::answer).text;
    } catch (const Error& e) {
        throw ToolError("key_segments", e.what());
    }
    return parse_segments(reply, manifest.duration_s);
}

std::vector<FrameRef> gather_segment_frames(const VideoManifest& manifest, const std::vector<Segment>& segments,
                                            int min_frames, int max_frames) {
    std::set<int> chosen;
    for (const auto& [t0, t1] : segments) {
        for (const auto& f : frames_in_window(manifest, t0, t1)) {
            chosen.insert(f.index);
        }
    }
    std::vector<FrameRef> candidates;
    for (int i : chosen) {
        candidates.push_back(manifest.frames[static_cast<std::size_t>(i)]);
    }
    if (static_cast<int>(candidates.size()) > max_frames) {
        return sample_frames_even(candidates, max_frames);
    }

    const auto target = std::min<std::size_t>(static_cast<std::size_t>(min_frames), manifest.frame_count());
    if (chosen.size() < target) {
        // even sweep at the target density first, then every remaining frame in order
        auto pad = sample_frames_even(manifest, static_cast<int>(target));
        pad.insert(pad.end(), manifest.frames.begin(), manifest.frames.end());
        for (const auto& f : pad) {
            if (chosen.size() >= target) {
                break;
            }
            chosen.insert(f.index);
        }
        candidates.clear();
        for (int i : chosen) {
            candidates.push_back(manifest.frames[static_cast<std::size_t>(i)]);
        }
    }
    return candidates;
}

ToolAnswer segment_answer(const SubQuestion& subq, const VideoSummary& summary, const VideoManifest& manifest,
                          const ToolContext& ctx) {
    auto segments = select_key_segments(subq, summary, manifest, ctx);
    const auto frames = gather_segment_frames(manifest, segments, ctx.config.min_frames, ctx.config.max_frames);

    std::string frame_times;
    for (const auto& f : frames) {
        frame_times += (frame_times.empty() ? "" : ", ") + fmt::format("{:.1f}", f.timestamp_s);
    }
    CompletionRequest req;
    req.backend_id = ctx.config.key_segments_backend;
    req.role_temperature = ctx.config.tool_temperature;
    req.max_output = ctx.config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageSegmentAnswer) +
                           " You inspect selected video frames in detail to answer a question."},
        {Role::user, fmt::format("Video summary:\n{}\n{} frames are attached, taken at seconds: {}.\nQuestion: {}\n"
                                 "Examine the frames closely and answer precisely.",
                                 summary.text, frames.size(), frame_times, subq.text)},
    };
    attach_frames(req, frames);

    ToolAnswer answer;
    answer.tool_id = ToolId::key_segments;
    answer.text = call_tool(ToolId::key_segments, req, ctx);
    answer.frames_used = indices_of(frames);
    answer.segments = std::move(segments);
    return answer;
}

ToolId parse_tool_choice(std::string_view reply) {
    const auto token = trim(reply);
    return token == "key_segments" ? ToolId::key_segments : ToolId::whole_video;
}

ToolId select_tool(const SubQuestion& subq, const ToolContext& ctx) {
    CompletionRequest req;
    req.backend_id = ctx.config.agent_backend;
    req.role_temperature = ctx.config.agent_temperature;
    req.max_output = ctx.config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageToolSelect) +
                           " You are a video question answering agent. Pick the one tool best suited to answer "
                           "the sub-question.\nTools:\n- " +
                           std::string(prompts::kWholeVideoToolDescription) + "\n- " +
                           std::string(prompts::kKeySegmentsToolDescription)},
        {Role::user, fmt::format("Sub-question: {}\nReply with exactly one token: whole_video or key_segments.",
                                 subq.text)},
    };
    try {
        return parse_tool_choice(traced_complete(ctx.client, req, ctx.trace, TraceStep::answer).text);
    } catch (const Error&) {
        return ToolId::whole_video;
    }
}

ToolAnswer run_tool(ToolId tool, const SubQuestion& subq, const VideoSummary& summary, const VideoManifest& manifest,
                    const ToolContext& ctx) {
    return tool == ToolId::whole_video ? whole_video_answer(subq, manifest, ctx)
                                       : segment_answer(subq, summary, manifest, ctx);
}

} // namespace dive
