#pragma once

#include "dive/backend.hpp"
#include "dive/config.hpp"
#include "dive/detector.hpp"
#include "dive/video.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dive::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "dive-test");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

struct SyntheticVideo {
    std::string video_id = "synthetic";
    std::vector<double> timestamps;  // one frame per entry
    double fps = 1.0;
    double duration_s = 0.0;
    bool with_audio = false;
};

/// n frames at i/fps, duration n/fps.
SyntheticVideo uniform_video(int n_frames, double fps, bool with_audio = false, std::string video_id = "synthetic");

/// Writes tiny PPM frames (distinct bytes per frame and video id) and
/// manifest.json into dir. Returns the manifest path.
std::filesystem::path write_video(const std::filesystem::path& dir, const SyntheticVideo& video);

/// In-memory manifest with placeholder paths and digests, for pure sampling tests.
VideoManifest memory_manifest(const std::vector<double>& timestamps, double duration_s, double fps = 1.0);

/// Script covering every stage of a run on the golden fixture; STOP after one round.
nlohmann::json golden_script();

/// "dog" on every frame (0.9), "ball" on frames 3..5 (0.8), a 0.1 "person"
/// on frame 0 that the default threshold drops.
nlohmann::json golden_detections(const VideoManifest& manifest);

/// Config for offline runs: scripted backend ids, no live backends needed.
PipelineConfig offline_config(const std::filesystem::path& cache_dir = {}, const std::filesystem::path& trace_dir = {});

/// Three-item dataset over the golden video ("golden"); two items are judged correct.
std::vector<nlohmann::json> golden_dataset_lines();

/// Writes a complete offline bundle: videos/golden/, script.json,
/// detections.json, config.json, dataset.jsonl.
void write_demo_bundle(const std::filesystem::path& dir);

} // namespace dive::testing
