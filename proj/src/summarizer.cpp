#include "dive/summarizer.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"
#include "dive/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <map>
#include <set>
#include <thread>

namespace dive {

nlohmann::json VideoSummary::to_json() const {
    auto tl = nlohmann::json::array();
    for (const auto& t : timelines) {
        auto intervals = nlohmann::json::array();
        for (const auto& [a, b] : t.intervals) {
            intervals.push_back({a, b});
        }
        tl.push_back({{"label", t.label}, {"intervals", intervals}, {"peak_confidence", t.peak_confidence}});
    }
    return {{"text", text}, {"timelines", tl}, {"labels", labels}, {"source_frames", source_frames}};
}

VideoSummary VideoSummary::from_json(const nlohmann::json& j) {
    VideoSummary s;
    s.text = j.at("text").get<std::string>();
    s.labels = j.at("labels").get<std::vector<std::string>>();
    s.source_frames = j.at("source_frames").get<std::vector<int>>();
    for (const auto& t : j.at("timelines")) {
        ObjectTimeline tl;
        tl.label = t.at("label").get<std::string>();
        tl.peak_confidence = t.at("peak_confidence").get<double>();
        for (const auto& iv : t.at("intervals")) {
            tl.intervals.emplace_back(iv.at(0).get<int>(), iv.at(1).get<int>());
        }
        s.timelines.push_back(std::move(tl));
    }
    return s;
}

namespace {

std::string normalize_label(std::string_view raw) {
    std::string s(raw);
    auto is_trim = [](unsigned char c) { return std::isspace(c) || c == '-' || c == '*' || c == '.' || c == '"'; };
    while (!s.empty() && is_trim(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
    while (!s.empty() && is_trim(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<Attachment> frame_attachments(const std::vector<FrameRef>& frames) {
    std::vector<Attachment> out;
    out.reserve(frames.size());
    for (const auto& f : frames) {
        out.push_back(Attachment{MediaKind::image, f.digest, f.path});
    }
    return out;
}

std::string format_seconds(double s) {
    return fmt::format("{:.1f}", s);
}

} // namespace

std::vector<std::string> parse_object_labels(std::string_view reply) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= reply.size(); ++i) {
        if (i == reply.size() || reply[i] == ',' || reply[i] == ';' || reply[i] == '\n' || reply[i] == '|') {
            auto label = normalize_label(reply.substr(start, i - start));
            if (!label.empty() && seen.insert(label).second) {
                out.push_back(std::move(label));
            }
            start = i + 1;
        }
    }
    return out;
}

std::vector<std::string> extract_object_labels(const std::vector<FrameRef>& frames, ChatClient& client,
                                               const PipelineConfig& config, TraceLog* trace) {
    if (frames.empty()) {
        throw ArgumentError("extract_object_labels: no frames");
    }
    CompletionRequest req;
    req.backend_id = config.summary_backend;
    req.role_temperature = config.agent_temperature;
    req.max_output = config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageObjectLabels) +
                           " You list the physical objects, people and animals visible in a set of video frames."},
        {Role::user, fmt::format("These are {} frames sampled evenly from one video. Name every distinct object "
                                 "class that appears. Reply with a comma-separated list of short lowercase noun "
                                 "labels and nothing else.",
                                 frames.size())},
    };
    req.attachments = frame_attachments(frames);
    return parse_object_labels(traced_complete(client, req, trace, TraceStep::summarize).text);
}

std::vector<Detection> detect_objects(DetectorClient& client, const VideoManifest& manifest,
                                      const std::vector<std::string>& labels, const DetectOptions& options,
                                      TraceLog* trace) {
    if (labels.empty()) {
        throw ArgumentError("detect_objects: labels must be nonempty");
    }
    const auto frames = static_cast<int>(manifest.frame_count()) > options.max_frames
                            ? sample_frames_even(manifest, options.max_frames)
                            : manifest.frames;
    if (frames.size() < manifest.frame_count()) {
        spdlog::warn("video {}: detection capped at {} of {} frames", manifest.video_id, frames.size(),
                     manifest.frame_count());
    }

    struct FrameResult {
        std::vector<RawDetection> detections;
        std::string started_at, ended_at;
        std::exception_ptr error;
    };
    std::vector<FrameResult> results(frames.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next.fetch_add(1); i < frames.size(); i = next.fetch_add(1)) {
            auto& r = results[i];
            r.started_at = utc_now_iso();
            try {
                r.detections = client.detect(frames[i], labels, options.threshold);
            } catch (...) {
                r.error = std::current_exception();
            }
            r.ended_at = utc_now_iso();
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.parallelism)),
                                                 frames.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back(worker);
        }
    }

    const std::set<std::string> wanted(labels.begin(), labels.end());
    const auto labels_json = nlohmann::json(labels).dump();
    std::vector<Detection> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        auto& r = results[i];
        nlohmann::json output = nlohmann::json::array();
        for (const auto& d : r.detections) {
            output.push_back({{"label", d.label},
                              {"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}},
                              {"confidence", d.confidence}});
        }
        if (trace != nullptr) {
            TraceEvent e;
            e.step = TraceStep::summarize;
            e.actor = client.actor();
            e.input_digest = sha256_hex(fmt::format("{}\n{}\n{:.6f}", frames[i].digest, labels_json, options.threshold));
            e.started_at = r.started_at;
            e.ended_at = r.ended_at;
            if (r.error) {
                try {
                    std::rethrow_exception(r.error);
                } catch (const std::exception& ex) {
                    e.error = ex.what();
                }
            } else {
                e.output = output.dump();
            }
            trace->append(std::move(e));
        }
        if (r.error) {
            std::rethrow_exception(r.error);
        }
        for (auto& d : r.detections) {
            const auto label = normalize_label(d.label);
            if (d.confidence < options.threshold || wanted.count(label) == 0) {
                continue;
            }
            out.push_back(Detection{frames[i].index, label, d.bbox, d.confidence});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        return std::tie(a.frame_index, a.label) < std::tie(b.frame_index, b.label);
    });
    return out;
}

std::vector<ObjectTimeline> aggregate_detections(const std::vector<Detection>& detections, int total_frames,
                                                 int gap_frames) {
    if (gap_frames < 0) {
        throw ArgumentError("aggregate_detections: negative gap");
    }
    std::map<std::string, std::set<int>> frames_by_label;
    std::map<std::string, double> peak;
    for (const auto& d : detections) {
        if (d.frame_index < 0 || d.frame_index >= total_frames) {
            throw ArgumentError(fmt::format("aggregate_detections: frame {} outside [0,{})", d.frame_index, total_frames));
        }
        frames_by_label[d.label].insert(d.frame_index);
        auto [it, inserted] = peak.emplace(d.label, d.confidence);
        if (!inserted) {
            it->second = std::max(it->second, d.confidence);
        }
    }
    std::vector<ObjectTimeline> out;
    for (const auto& [label, frames] : frames_by_label) {
        ObjectTimeline tl;
        tl.label = label;
        tl.peak_confidence = peak[label];
        for (int f : frames) {
            if (!tl.intervals.empty() && f - tl.intervals.back().second - 1 <= gap_frames) {
                tl.intervals.back().second = f;
            } else {
                tl.intervals.emplace_back(f, f);
            }
        }
        out.push_back(std::move(tl));
    }
    return out;
}

int default_gap_frames(const VideoManifest& manifest, const PipelineConfig& config) {
    if (config.gap_bridge_frames) {
        return *config.gap_bridge_frames;
    }
    return static_cast<int>(std::floor(manifest.fps / 2.0));
}

std::string render_timeline_digest(const std::vector<ObjectTimeline>& timelines, const VideoManifest& manifest) {
    std::string out;
    for (const auto& tl : timelines) {
        std::string spans;
        for (const auto& [a, b] : tl.intervals) {
            if (!spans.empty()) {
                spans += ", ";
            }
            spans += format_seconds(manifest.frames.at(static_cast<std::size_t>(a)).timestamp_s) + "–" +
                     format_seconds(manifest.frames.at(static_cast<std::size_t>(b)).timestamp_s);
        }
        out += fmt::format("{}: seconds {} (peak {:.2f})\n", tl.label, spans, tl.peak_confidence);
    }
    return out;
}

namespace {

std::string summary_config_digest(const VideoManifest& manifest, const PipelineConfig& config) {
    return sha256_hex(fmt::format("{}|{}|{:.6f}|{}|{:.6f}|{}|{}|{}", prompts::kPromptVersion, config.summary_backend,
                                  config.agent_temperature, config.summary_frames, config.detection_threshold,
                                  default_gap_frames(manifest, config), config.max_detection_frames,
                                  config.max_output ? *config.max_output : 0));
}

VideoSummary compute_summary(const VideoManifest& manifest, ChatClient& client, DetectorClient& detector,
                             const PipelineConfig& config, TraceLog* trace) {
    VideoSummary summary;
    const auto sampled = sample_frames_even(manifest, config.summary_frames);
    for (const auto& f : sampled) {
        summary.source_frames.push_back(f.index);
    }
    try {
        summary.labels = extract_object_labels(sampled, client, config, trace);
    } catch (const Error& e) {
        throw StepFailure("summarize/labels", e.what());
    }
    if (!summary.labels.empty()) {
        try {
            const auto detections = detect_objects(
                detector, manifest, summary.labels,
                DetectOptions{config.detection_threshold, config.max_detection_frames, config.detector_parallelism},
                trace);
            summary.timelines =
                aggregate_detections(detections, static_cast<int>(manifest.frame_count()), default_gap_frames(manifest, config));
        } catch (const Error& e) {
            throw StepFailure("summarize/detect", e.what());
        }
    }

    const auto digest = render_timeline_digest(summary.timelines, manifest);
    CompletionRequest req;
    req.backend_id = config.summary_backend;
    req.role_temperature = config.agent_temperature;
    req.max_output = config.max_output;
    req.messages = {
        {Role::system, std::string(prompts::kStageVideoSummary) +
                           " You write object-centric video summaries: the key objects, when they appear, how they "
                           "move or change, and how they interact."},
        {Role::user,
         fmt::format("Video duration: {:.1f} s. {} frames sampled evenly from the video are attached.\n"
                     "Object detection timelines over all frames:\n{}\n"
                     "Write a concise summary of the video describing key objects, their transitions and "
                     "interactions over time.",
                     manifest.duration_s, sampled.size(), digest.empty() ? std::string("(no objects detected)\n") : digest)},
    };
    req.attachments = frame_attachments(sampled);
    try {
        summary.text = traced_complete(client, req, trace, TraceStep::summarize).text;
    } catch (const Error& e) {
        throw StepFailure("summarize/generate", e.what());
    }
    if (summary.text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw StepFailure("summarize/generate", "empty summary reply");
    }
    return summary;
}

} // namespace

VideoSummary summarize_video(const VideoManifest& manifest, ChatClient& client, DetectorClient& detector,
                             const PipelineConfig& config, TraceLog* trace) {
    if (config.cache_dir.empty()) {
        return compute_summary(manifest, client, detector, config, trace);
    }
    const auto key = sha256_hex(manifest.content_digest() + "|" + summary_config_digest(manifest, config));
    const auto path = config.cache_dir / "summaries" / (key + ".json");

    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
        try {
            const auto j = nlohmann::json::parse(read_file(path));
            auto summary = VideoSummary::from_json(j.at("summary"));
            if (trace != nullptr) {
                for (const auto& ej : j.at("events")) {
                    auto e = TraceEvent::from_json(ej);
                    e.started_at = e.ended_at = utc_now_iso();
                    trace->append(std::move(e));
                }
            }
            return summary;
        } catch (const std::exception& e) {
            spdlog::warn("ignoring corrupt summary cache {}: {}", path.string(), e.what());
        }
    }

    TraceLog local;
    auto forward = [&] {
        auto events = nlohmann::json::array();
        for (const auto& e : local.events()) {
            events.push_back(e.to_json());
            if (trace != nullptr) {
                trace->append(e);
            }
        }
        return events;
    };
    VideoSummary summary;
    try {
        summary = compute_summary(manifest, client, detector, config, &local);
    } catch (...) {
        forward();
        throw;
    }
    const auto events = forward();
    write_file_atomic(path, nlohmann::json{{"summary", summary.to_json()}, {"events", events}}.dump());
    return summary;
}

} // namespace dive
