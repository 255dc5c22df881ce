#include "dive/cli.hpp"

#include "dive/bench.hpp"
#include "dive/cache.hpp"
#include "dive/config.hpp"
#include "dive/digest.hpp"
#include "dive/errors.hpp"
#include "dive/http_backend.hpp"
#include "dive/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <ostream>

namespace dive::cli {

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string script_path;
    std::string cache_dir;
    std::string trace_dir;
    std::string detections_path;
    std::string detector_url;
    bool verbose = false;
};

PipelineConfig resolve_config(const GlobalOptions& g) {
    std::string path = g.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("DIVE_CONFIG"); env != nullptr) {
            path = env;
        }
    }
    auto config = path.empty() ? default_config() : load_config(path);
    if (!g.cache_dir.empty()) {
        config.cache_dir = g.cache_dir;
    }
    if (!g.trace_dir.empty()) {
        config.trace_dir = g.trace_dir;
    }
    if (!g.detector_url.empty()) {
        config.detector_endpoint = g.detector_url;
    }
    config.validate();
    return config;
}

std::shared_ptr<ChatClient> build_client(const PipelineConfig& config, const GlobalOptions& g) {
    auto registry = std::make_shared<BackendRegistry>();
    std::shared_ptr<ChatClient> scripted;
    if (!g.script_path.empty()) {
        scripted = ScriptedBackend::from_file(g.script_path);
    }
    std::shared_ptr<CompletionCache> cache;
    if (!config.cache_dir.empty()) {
        cache = std::make_shared<CompletionCache>(config.cache_dir / "completions");
    }
    for (const auto& id : config.role_backends()) {
        std::shared_ptr<ChatClient> client = scripted;
        if (!client) {
            auto it = config.backends.find(id);
            if (it == config.backends.end()) {
                throw ConfigurationError("backend '" + id + "' is used by a role but not defined under 'backends'");
            }
            client = std::make_shared<HttpChatBackend>(it->second);
        }
        if (cache) {
            client = std::make_shared<CachedClient>(client, cache);
        }
        registry->add(id, client);
    }
    return registry;
}

std::shared_ptr<DetectorClient> build_detector(const PipelineConfig& config, const GlobalOptions& g) {
    if (!g.detections_path.empty()) {
        return StubDetectorClient::from_file(g.detections_path);
    }
    if (!config.detector_endpoint.empty()) {
        return std::make_shared<HttpDetectorClient>(config.detector_endpoint);
    }
    throw ConfigurationError("no detector configured: set detector_endpoint or pass --detections <fixture>");
}

std::shared_ptr<const VideoManifest> load_video(const std::string& path) {
    return std::make_shared<const VideoManifest>(load_manifest(path));
}

int cmd_run(const GlobalOptions& g, const std::string& video, const std::string& question, std::ostream& out) {
    auto config = resolve_config(g);
    if (config.trace_dir.empty()) {
        config.trace_dir = "traces";
    }
    auto manifest = load_video(video);
    const auto client = build_client(config, g);
    const auto detector = build_detector(config, g);
    Task task;
    task.task_id = "run-" + sha256_hex(manifest->content_digest() + "\n" + question).substr(0, 12);
    task.video = manifest;
    task.question = question;
    const auto result = run_pipeline(task, config, PipelineServices{*client, *detector});
    out << result.final_answer << '\n';
    out << "trace: " << result.trace_path.string() << '\n';
    return kExitOk;
}

int cmd_summarize(const GlobalOptions& g, const std::string& video, std::ostream& out) {
    const auto config = resolve_config(g);
    auto manifest = load_video(video);
    const auto client = build_client(config, g);
    const auto detector = build_detector(config, g);
    const auto summary = summarize_video(*manifest, *client, *detector, config, nullptr);
    out << summary.text << '\n';
    if (!summary.timelines.empty()) {
        out << "\nobject timelines:\n" << render_timeline_digest(summary.timelines, *manifest);
    }
    return kExitOk;
}

int cmd_bench(const GlobalOptions& g, const std::string& dataset, const std::string& videos, const std::string& out_dir,
              std::ostream& out) {
    const auto config = resolve_config(g);
    const auto items = load_dataset(dataset);
    const auto client = build_client(config, g);
    const auto detector = build_detector(config, g);
    BenchOptions options;
    options.videos_dir = videos.empty() ? std::filesystem::path(dataset).parent_path() / "videos"
                                        : std::filesystem::path(videos);
    options.out_dir = out_dir;
    const auto result = run_benchmark(items, config, *client, *detector, options);
    out << result.report.to_table();
    out << "report: " << (options.out_dir / "report.json").string() << '\n';
    out << "verdicts: " << (options.out_dir / "verdicts.jsonl").string() << '\n';
    return kExitOk;
}

int cmd_trace_show(const std::string& file, std::ostream& out) {
    const auto events = read_trace(file);
    std::size_t i = 0;
    int n = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j < events.size() && events[j].step == events[i].step) {
            ++j;
        }
        const auto count = j - i;
        out << fmt::format("{:>3}. {:<18} {} event{}\n", ++n, to_string(events[i].step), count, count == 1 ? "" : "s");
        i = j;
    }
    out << fmt::format("{} events total\n", events.size());
    return kExitOk;
}

} // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("dive", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);

    CLI::App app{"Iterative video question answering engine", "dive"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    app.add_option("--config", g.config_path, "Pipeline config (JSON); default $DIVE_CONFIG");
    app.add_option("--script", g.script_path, "Scripted backend file; replaces every live backend");
    app.add_option("--cache-dir", g.cache_dir, "Override the cache directory");
    app.add_option("--trace-dir", g.trace_dir, "Override the trace directory");
    app.add_option("--detections", g.detections_path, "Detection fixture table used instead of the service");
    app.add_option("--detector", g.detector_url, "Detection service base URL");
    app.add_flag("-v,--verbose", g.verbose, "Debug logging");

    std::string video, question, dataset, videos_dir, out_dir = "bench_out", trace_file;
    auto* run = app.add_subcommand("run", "Answer one question about one video");
    run->add_option("--video", video, "Video manifest")->required();
    run->add_option("--question", question, "Question text")->required();

    auto* summarize = app.add_subcommand("summarize", "Print the object-centric summary of a video");
    summarize->add_option("--video", video, "Video manifest")->required();

    auto* bench = app.add_subcommand("bench", "Run and judge a QA dataset");
    bench->add_option("--dataset", dataset, "Dataset (JSON lines)")->required();
    bench->add_option("--videos", videos_dir, "Directory of <video_id>/manifest.json; default <dataset dir>/videos");
    bench->add_option("--out", out_dir, "Output directory for report.json and verdicts.jsonl");

    auto* trace = app.add_subcommand("trace", "Inspect trace files");
    trace->require_subcommand(1);
    auto* show = trace->add_subcommand("show", "Print the step sequence of a trace");
    show->add_option("file", trace_file, "Trace file")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) {
        reversed.pop_back();  // program name
    }
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }
    spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*run) return cmd_run(g, video, question, out);
        if (*summarize) return cmd_summarize(g, video, out);
        if (*bench) return cmd_bench(g, dataset, videos_dir, out_dir, out);
        if (*show) return cmd_trace_show(trace_file, out);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ConfigurationError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ArgumentError& e) {
        err << "argument error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const PipelineError& e) {
        err << "pipeline error: " << e.what() << '\n';
        if (!e.trace_path().empty()) {
            err << "trace: " << e.trace_path() << '\n';
        }
        return kExitPipeline;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitPipeline;
    }
    err << app.help();
    return kExitValidation;
}

} // namespace dive::cli
