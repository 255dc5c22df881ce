#include "fixtures.hpp"

#include "dive/digest.hpp"

#include <fmt/format.h>

#include <fstream>
#include <random>

namespace dive::testing {

TempDir::TempDir(const std::string& prefix) {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (;;) {
        auto candidate = base / fmt::format("{}-{:08x}", prefix, rd());
        if (std::filesystem::create_directory(candidate)) {
            path_ = std::move(candidate);
            break;
        }
    }
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

SyntheticVideo uniform_video(int n_frames, double fps, bool with_audio, std::string video_id) {
    SyntheticVideo v;
    v.video_id = std::move(video_id);
    v.fps = fps;
    for (int i = 0; i < n_frames; ++i) {
        v.timestamps.push_back(i / fps);
    }
    v.duration_s = n_frames / fps;
    v.with_audio = with_audio;
    return v;
}

std::filesystem::path write_video(const std::filesystem::path& dir, const SyntheticVideo& video) {
    std::filesystem::create_directories(dir / "frames");
    nlohmann::json frames = nlohmann::json::array();
    for (std::size_t i = 0; i < video.timestamps.size(); ++i) {
        const auto rel = fmt::format("frames/{:05d}.ppm", i);
        std::string ppm = "P6\n2 2\n255\n";
        const auto seed = sha256_hex(video.video_id + "#" + std::to_string(i));
        ppm += seed.substr(0, 12);
        std::ofstream(dir / rel, std::ios::binary) << ppm;
        frames.push_back({{"index", i}, {"timestamp_s", video.timestamps[i]}, {"file", rel}});
    }
    nlohmann::json manifest = {
        {"video_id", video.video_id},
        {"fps", video.fps},
        {"duration_s", video.duration_s},
        {"frames", frames},
    };
    if (video.with_audio) {
        std::ofstream(dir / "audio.wav", std::ios::binary) << "RIFF-synthetic-" << video.video_id;
        manifest["audio"] = "audio.wav";
    }
    const auto path = dir / "manifest.json";
    std::ofstream(path) << manifest.dump(2);
    return path;
}

VideoManifest memory_manifest(const std::vector<double>& timestamps, double duration_s, double fps) {
    VideoManifest m;
    m.video_id = "memory";
    m.fps = fps;
    m.duration_s = duration_s;
    for (std::size_t i = 0; i < timestamps.size(); ++i) {
        m.frames.push_back(FrameRef{static_cast<int>(i), timestamps[i], fmt::format("/nonexistent/{}.ppm", i),
                                    fmt::format("digest-{}", i)});
    }
    return m;
}

nlohmann::json golden_script() {
    auto rule = [](nlohmann::json contains, std::string response) {
        return nlohmann::json{{"contains", std::move(contains)}, {"response", std::move(response)}};
    };
    return {
        {"rules",
         {
             rule("[stage=object-labels]", "dog, ball, person, dog"),
             rule("[stage=video-summary]",
                  "A brown dog chases a red ball across a lawn while a person watches from the left; the dog "
                  "catches the ball around the middle of the clip."),
             rule("[stage=intent]",
                  "The question asks about the outcome of the chase: whether the dog ends up holding the ball."),
             rule("[stage=breakdown]",
                  "SUBQ 5: Does the dog touch the ball at any point?\nSUBQ 2: Where is the person standing?"),
             rule({"[stage=tool-select]", "touch the ball"}, "key_segments"),
             rule("[stage=tool-select]", "whole_video"),
             rule("[stage=segment-select]", "[[2.0, 4.0], [7.0, 9.0]]"),
             rule("[stage=segment-answer]", "Yes, the dog grabs the ball in its mouth at about 4 s."),
             rule("[stage=whole-video]", "The person stands at the left edge of the lawn the whole time."),
             rule("[stage=refine]", "NO_CHANGES"),
             rule("[stage=continue]", "STOP"),
             rule("[stage=final]",
                  "Yes. The dog catches the ball in its mouth at around 4 seconds while the person watches."),
             rule({"[stage=judge]", "Reference answer: No"}, "INCORRECT: contradicts the reference"),
             rule("[stage=judge]", "CORRECT: matches the reference"),
         }},
    };
}

nlohmann::json golden_detections(const VideoManifest& manifest) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& f : manifest.frames) {
        auto dets = nlohmann::json::array();
        dets.push_back({{"label", "dog"}, {"bbox", {0.1, 0.2, 0.4, 0.6}}, {"confidence", 0.9}});
        if (f.index >= 3 && f.index <= 5) {
            dets.push_back({{"label", "ball"}, {"bbox", {0.5, 0.5, 0.6, 0.6}}, {"confidence", 0.8}});
        }
        if (f.index == 0) {
            dets.push_back({{"label", "person"}, {"bbox", {0.0, 0.0, 0.2, 0.9}}, {"confidence", 0.1}});
        }
        table[f.digest] = dets;
    }
    return table;
}

PipelineConfig offline_config(const std::filesystem::path& cache_dir, const std::filesystem::path& trace_dir) {
    PipelineConfig c;
    c.agent_backend = "agent";
    c.whole_video_backend = "whole-video";
    c.key_segments_backend = "frames";
    c.summary_backend = "frames";
    c.judge_backend = "judge";
    c.cache_dir = cache_dir;
    c.trace_dir = trace_dir;
    c.detector_parallelism = 2;
    c.backends.clear();
    return c;
}

std::vector<nlohmann::json> golden_dataset_lines() {
    return {
        {{"item_id", "q1"}, {"video_id", "golden"}, {"question", "Does the dog catch the ball?"},
         {"reference_answer", "Yes, the dog catches the ball."}, {"category", "Interpretation of visual context"}},
        {{"item_id", "q2"}, {"video_id", "golden"}, {"question", "Is there a dog in the video?"},
         {"reference_answer", "Yes, a brown dog."}, {"category", "Multiple actions in a single video"}},
        {{"item_id", "q3"}, {"video_id", "golden"}, {"question", "Does the person throw the ball?"},
         {"reference_answer", "No, the person only watches."}, {"category", "Interpretation of visual context"}},
    };
}

void write_demo_bundle(const std::filesystem::path& dir) {
    const auto manifest_path = write_video(dir / "videos" / "golden", uniform_video(10, 1.0, true, "golden"));
    const auto manifest = load_manifest(manifest_path);
    std::ofstream(dir / "script.json") << golden_script().dump(2);
    std::ofstream(dir / "detections.json") << golden_detections(manifest).dump(2);
    auto config = offline_config().to_json();
    config["cache_dir"] = "cache";
    config["trace_dir"] = "traces";
    std::ofstream(dir / "config.json") << config.dump(2);
    std::ofstream dataset(dir / "dataset.jsonl");
    for (const auto& line : golden_dataset_lines()) {
        dataset << line.dump() << '\n';
    }
}

} // namespace dive::testing
