#pragma once

#include "dive/backend.hpp"
#include "dive/config.hpp"
#include "dive/ledger.hpp"
#include "dive/summarizer.hpp"
#include "dive/trace.hpp"
#include "dive/video.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dive {

enum class ToolId { whole_video, key_segments };
std::string_view to_string(ToolId id);

using Segment = std::pair<double, double>;  // seconds, t0 <= t1

struct ToolAnswer {
    ToolId tool_id = ToolId::whole_video;
    std::string text;
    std::vector<int> frames_used;
    std::optional<std::vector<Segment>> segments;  // key_segments only
};

// Where tool calls go and which trace step they are logged under.
struct ToolContext {
    ChatClient& client;
    const PipelineConfig& config;
    TraceLog* trace = nullptr;
};

/// 1 fps stills plus the audio track, one request at tool temperature.
ToolAnswer whole_video_answer(const SubQuestion& subq, const VideoManifest& manifest, const ToolContext& ctx);

/// Parses "[[t0,t1],...]" (the first '[' to the last ']'), clamps to
/// [0,duration], drops empty or inverted ranges. Falls back to the whole video.
std::vector<Segment> parse_segments(std::string_view reply, double duration_s);

std::vector<Segment> select_key_segments(const SubQuestion& subq, const VideoSummary& summary,
                                         const VideoManifest& manifest, const ToolContext& ctx);

/// Frames for the key-segment tool: union of the segment windows, evenly
/// thinned to max_frames, padded from an even sweep of the whole video up to
/// min(min_frames, N). Sorted by index.
std::vector<FrameRef> gather_segment_frames(const VideoManifest& manifest, const std::vector<Segment>& segments,
                                            int min_frames, int max_frames);

ToolAnswer segment_answer(const SubQuestion& subq, const VideoSummary& summary, const VideoManifest& manifest,
                          const ToolContext& ctx);

/// Exact token match on the trimmed reply; anything else means whole_video.
ToolId parse_tool_choice(std::string_view reply);

ToolId select_tool(const SubQuestion& subq, const ToolContext& ctx);

/// Runs the chosen tool; failures surface as ToolError.
ToolAnswer run_tool(ToolId tool, const SubQuestion& subq, const VideoSummary& summary, const VideoManifest& manifest,
                    const ToolContext& ctx);

} // namespace dive
