#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dive {

struct FrameRef {
    int index = 0;  // position in manifest order
    double timestamp_s = 0.0;
    std::filesystem::path path;
    std::string digest;

    bool operator==(const FrameRef&) const = default;
};

struct AudioRef {
    std::filesystem::path path;
    std::string digest;
};

struct VideoManifest {
    std::string video_id;
    std::vector<FrameRef> frames;
    double fps = 0.0;
    double duration_s = 0.0;
    std::optional<AudioRef> audio;

    std::size_t frame_count() const noexcept { return frames.size(); }

    /// Digest over the id, frame digests and timestamps, and the audio digest.
    std::string content_digest() const;
};

/// Reads a manifest JSON file. Frame and audio paths are relative to the
/// manifest's directory. Throws ValidationError on any schema or file problem.
VideoManifest load_manifest(const std::filesystem::path& path);

/// Checks the structural invariants of an in-memory manifest.
void validate_manifest(const VideoManifest& manifest);

/// k frames at floor(i*(N-1)/(k-1)); all frames when N <= k; frame 0 when k == 1.
std::vector<FrameRef> sample_frames_even(const std::vector<FrameRef>& frames, int k);
std::vector<FrameRef> sample_frames_even(const VideoManifest& manifest, int k);

/// For every whole second in [0, floor(duration)], the frame nearest to it
/// (earlier frame on ties), consecutive duplicates removed.
std::vector<FrameRef> sample_one_fps(const VideoManifest& manifest);

/// Frames with t0 <= timestamp <= t1, in manifest order.
std::vector<FrameRef> frames_in_window(const VideoManifest& manifest, double t0, double t1);

} // namespace dive
