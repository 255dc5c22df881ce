#pragma once

#include "dive/backend.hpp"
#include "dive/config.hpp"
#include "dive/detector.hpp"
#include "dive/trace.hpp"
#include "dive/video.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace dive {

struct Detection {
    int frame_index = 0;
    std::string label;
    BoundingBox bbox;
    double confidence = 0.0;
    bool operator==(const Detection&) const = default;
};

struct ObjectTimeline {
    std::string label;
    std::vector<std::pair<int, int>> intervals;  // inclusive frame ranges, sorted, disjoint
    double peak_confidence = 0.0;
    bool operator==(const ObjectTimeline&) const = default;
};

struct VideoSummary {
    std::string text;
    std::vector<ObjectTimeline> timelines;
    std::vector<std::string> labels;
    std::vector<int> source_frames;

    nlohmann::json to_json() const;
    static VideoSummary from_json(const nlohmann::json& j);
    bool operator==(const VideoSummary&) const = default;
};

/// Splits a label reply on commas, semicolons, pipes and newlines; trims,
/// lowercases and drops duplicates keeping first occurrence.
std::vector<std::string> parse_object_labels(std::string_view reply);

std::vector<std::string> extract_object_labels(const std::vector<FrameRef>& frames, ChatClient& client,
                                               const PipelineConfig& config, TraceLog* trace);

struct DetectOptions {
    double threshold = 0.3;
    int max_frames = 3000;
    int parallelism = 4;
};

/// Runs the detector over every manifest frame (or an even subsample of
/// max_frames when the video is longer). Detections below the threshold or
/// with labels outside `labels` are dropped; the result is sorted by
/// (frame_index, label). Trace events are appended in frame order.
std::vector<Detection> detect_objects(DetectorClient& client, const VideoManifest& manifest,
                                      const std::vector<std::string>& labels, const DetectOptions& options,
                                      TraceLog* trace);

/// Per-label maximal presence runs; runs separated by at most gap_frames
/// missing frames are merged. Labels come out sorted.
std::vector<ObjectTimeline> aggregate_detections(const std::vector<Detection>& detections, int total_frames,
                                                 int gap_frames);

int default_gap_frames(const VideoManifest& manifest, const PipelineConfig& config);

/// One line per timeline: "label: seconds a–b, c–d (peak p)".
std::string render_timeline_digest(const std::vector<ObjectTimeline>& timelines, const VideoManifest& manifest);

/// Sample -> labels -> detect -> aggregate -> summary completion. With a
/// cache_dir configured the result (and the trace events that produced it)
/// is stored under summaries/ and replayed on the next call for the same
/// video and configuration.
VideoSummary summarize_video(const VideoManifest& manifest, ChatClient& client, DetectorClient& detector,
                             const PipelineConfig& config, TraceLog* trace);

} // namespace dive
