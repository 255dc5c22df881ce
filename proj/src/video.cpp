#include "dive/video.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>

namespace dive {

std::string VideoManifest::content_digest() const {
    std::string material = video_id + '\n';
    for (const auto& f : frames) {
        material += fmt::format("{}:{:.6f}:{}\n", f.index, f.timestamp_s, f.digest);
    }
    material += audio ? audio->digest : std::string("-");
    return sha256_hex(material);
}

void validate_manifest(const VideoManifest& m) {
    const auto where = "manifest " + m.video_id + ": ";
    if (m.video_id.empty()) {
        throw ValidationError("manifest: empty video_id");
    }
    if (m.frames.empty()) {
        throw ValidationError(where + "no frames");
    }
    if (!(m.fps > 0.0)) {
        throw ValidationError(where + "fps must be positive");
    }
    if (!(m.duration_s > 0.0)) {
        throw ValidationError(where + "duration_s must be positive");
    }
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        const auto& f = m.frames[i];
        if (f.index != static_cast<int>(i)) {
            throw ValidationError(where + fmt::format("frame at position {} has index {}", i, f.index));
        }
        if (!(f.timestamp_s >= 0.0)) {
            throw ValidationError(where + fmt::format("frame {} has negative timestamp", i));
        }
        if (i > 0 && !(f.timestamp_s > m.frames[i - 1].timestamp_s)) {
            throw ValidationError(where + fmt::format("timestamps not strictly increasing at frame {}", i));
        }
    }
    if (m.duration_s < m.frames.back().timestamp_s) {
        throw ValidationError(where + "duration_s is before the last frame timestamp");
    }
}

VideoManifest load_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    VideoManifest m;
    try {
        m.video_id = j.at("video_id").get<std::string>();
        m.fps = j.at("fps").get<double>();
        m.duration_s = j.at("duration_s").get<double>();
        if (j.contains("audio") && !j["audio"].is_null()) {
            AudioRef audio;
            audio.path = base / j["audio"].get<std::string>();
            if (!std::filesystem::is_regular_file(audio.path)) {
                throw ValidationError(path.string() + ": missing audio file " + audio.path.string());
            }
            audio.digest = sha256_file(audio.path);
            m.audio = std::move(audio);
        }
        for (const auto& fj : j.at("frames")) {
            FrameRef f;
            f.index = fj.at("index").get<int>();
            f.timestamp_s = fj.at("timestamp_s").get<double>();
            f.path = base / fj.at("file").get<std::string>();
            m.frames.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    validate_manifest(m);
    for (auto& f : m.frames) {
        if (!std::filesystem::is_regular_file(f.path)) {
            throw ValidationError(path.string() + ": missing frame file " + f.path.string());
        }
        f.digest = sha256_file(f.path);
    }
    return m;
}

std::vector<FrameRef> sample_frames_even(const std::vector<FrameRef>& frames, int k) {
    if (k < 1) {
        throw ArgumentError("sample_frames_even: k must be >= 1");
    }
    const auto n = static_cast<long long>(frames.size());
    if (n <= k) {
        return frames;
    }
    if (k == 1) {
        return {frames.front()};
    }
    std::vector<FrameRef> out;
    out.reserve(static_cast<std::size_t>(k));
    for (long long i = 0; i < k; ++i) {
        out.push_back(frames[static_cast<std::size_t>(i * (n - 1) / (k - 1))]);
    }
    return out;
}

std::vector<FrameRef> sample_frames_even(const VideoManifest& manifest, int k) {
    return sample_frames_even(manifest.frames, k);
}

std::vector<FrameRef> sample_one_fps(const VideoManifest& manifest) {
    const auto& frames = manifest.frames;
    std::vector<FrameRef> out;
    if (frames.empty()) {
        return out;
    }
    const auto last_second = static_cast<long long>(std::floor(manifest.duration_s));
    std::size_t j = 0;
    for (long long s = 0; s <= last_second; ++s) {
        const auto target = static_cast<double>(s);
        // targets increase, so the nearest frame index never moves backwards
        while (j + 1 < frames.size() &&
               std::abs(frames[j + 1].timestamp_s - target) < std::abs(frames[j].timestamp_s - target)) {
            ++j;
        }
        if (out.empty() || out.back().index != frames[j].index) {
            out.push_back(frames[j]);
        }
    }
    return out;
}

std::vector<FrameRef> frames_in_window(const VideoManifest& manifest, double t0, double t1) {
    if (!(t0 >= 0.0) || !(t1 >= 0.0)) {
        throw ArgumentError("frames_in_window: negative bound");
    }
    if (t0 > t1) {
        throw ArgumentError(fmt::format("frames_in_window: t0 {} > t1 {}", t0, t1));
    }
    std::vector<FrameRef> out;
    for (const auto& f : manifest.frames) {
        if (f.timestamp_s >= t0 && f.timestamp_s <= t1) {
            out.push_back(f);
        }
    }
    return out;
}

} // namespace dive
