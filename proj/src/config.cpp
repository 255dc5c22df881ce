#include "dive/config.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace dive {

void PipelineConfig::validate() const {
    auto fail = [](const std::string& what) { throw ConfigurationError("config: " + what); };
    if (max_rounds < 1) fail("max_rounds must be >= 1");
    if (!(agent_temperature >= 0.0 && agent_temperature <= 2.0)) fail("agent_temperature outside [0,2]");
    if (!(tool_temperature >= 0.0 && tool_temperature <= 2.0)) fail("tool_temperature outside [0,2]");
    if (min_frames < 1) fail("min_frames must be >= 1");
    if (min_frames > max_frames) fail("min_frames > max_frames");
    if (summary_frames < 1) fail("summary_frames must be >= 1");
    if (parallel_tasks < 1) fail("parallel_tasks must be >= 1");
    if (!(detection_threshold >= 0.0 && detection_threshold <= 1.0)) fail("detection_threshold outside [0,1]");
    if (gap_bridge_frames && *gap_bridge_frames < 0) fail("gap_bridge_frames must be >= 0");
    if (max_detection_frames < 1) fail("max_detection_frames must be >= 1");
    if (detector_parallelism < 1) fail("detector_parallelism must be >= 1");
    if (max_subquestions < 1) fail("max_subquestions must be >= 1");
    if (max_refinement_adds < 0) fail("max_refinement_adds must be >= 0");
    if (max_output && *max_output < 1) fail("max_output must be positive");
    for (const auto& id : role_backends()) {
        if (id.empty()) fail("empty backend id for a role");
    }
}

std::vector<std::string> PipelineConfig::role_backends() const {
    std::vector<std::string> ids = {agent_backend, whole_video_backend, key_segments_backend, summary_backend,
                                    judge_backend};
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

namespace {

nlohmann::json backend_to_json(const HttpBackendConfig& b) {
    return {
        {"shape", to_string(b.shape)},
        {"endpoint", b.endpoint},
        {"model", b.model},
        {"auth_header", b.auth_header},
        {"auth_prefix", b.auth_prefix},
        {"api_key_env", b.api_key_env},
        {"retries", b.retries},
        {"backoff_base_s", b.backoff_base_s},
        {"backoff_factor", b.backoff_factor},
        {"timeout_s", b.timeout_s},
    };
}

HttpBackendConfig backend_from_json(const nlohmann::json& j) {
    HttpBackendConfig b;
    b.shape = provider_shape_from_string(j.at("shape").get<std::string>());
    b.endpoint = j.at("endpoint").get<std::string>();
    b.model = j.value("model", "");
    b.auth_header = j.value("auth_header", b.auth_header);
    b.auth_prefix = j.value("auth_prefix", b.auth_prefix);
    b.api_key_env = j.value("api_key_env", "");
    b.retries = j.value("retries", b.retries);
    b.backoff_base_s = j.value("backoff_base_s", b.backoff_base_s);
    b.backoff_factor = j.value("backoff_factor", b.backoff_factor);
    b.timeout_s = j.value("timeout_s", b.timeout_s);
    return b;
}

const std::set<std::string> kKnownKeys = {
    "max_rounds",          "agent_temperature",  "tool_temperature",     "agent_backend",
    "whole_video_backend", "key_segments_backend", "summary_backend",    "judge_backend",
    "min_frames",          "max_frames",          "summary_frames",       "detector_endpoint",
    "cache_dir",           "trace_dir",           "parallel_tasks",       "detection_threshold",
    "gap_bridge_frames",   "max_detection_frames", "detector_parallelism", "max_subquestions",
    "max_refinement_adds", "max_output",          "backends",
};

} // namespace

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json backends_json = nlohmann::json::object();
    for (const auto& [id, b] : backends) {
        backends_json[id] = backend_to_json(b);
    }
    return {
        {"max_rounds", max_rounds},
        {"agent_temperature", agent_temperature},
        {"tool_temperature", tool_temperature},
        {"agent_backend", agent_backend},
        {"whole_video_backend", whole_video_backend},
        {"key_segments_backend", key_segments_backend},
        {"summary_backend", summary_backend},
        {"judge_backend", judge_backend},
        {"min_frames", min_frames},
        {"max_frames", max_frames},
        {"summary_frames", summary_frames},
        {"detector_endpoint", detector_endpoint},
        {"cache_dir", cache_dir.string()},
        {"trace_dir", trace_dir.string()},
        {"parallel_tasks", parallel_tasks},
        {"detection_threshold", detection_threshold},
        {"gap_bridge_frames", gap_bridge_frames ? nlohmann::json(*gap_bridge_frames) : nlohmann::json(nullptr)},
        {"max_detection_frames", max_detection_frames},
        {"detector_parallelism", detector_parallelism},
        {"max_subquestions", max_subquestions},
        {"max_refinement_adds", max_refinement_adds},
        {"max_output", max_output ? nlohmann::json(*max_output) : nlohmann::json(nullptr)},
        {"backends", std::move(backends_json)},
    };
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) {
        throw ConfigurationError("config: top level must be an object");
    }
    for (const auto& [key, _] : j.items()) {
        if (kKnownKeys.count(key) == 0) {
            throw ConfigurationError("config: unknown key '" + key + "'");
        }
    }
    PipelineConfig c = default_config();
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    try {
        c.max_rounds = j.value("max_rounds", c.max_rounds);
        c.agent_temperature = j.value("agent_temperature", c.agent_temperature);
        c.tool_temperature = j.value("tool_temperature", c.tool_temperature);
        c.agent_backend = j.value("agent_backend", c.agent_backend);
        c.whole_video_backend = j.value("whole_video_backend", c.whole_video_backend);
        c.key_segments_backend = j.value("key_segments_backend", c.key_segments_backend);
        c.summary_backend = j.value("summary_backend", c.summary_backend);
        c.judge_backend = j.value("judge_backend", c.judge_backend);
        c.min_frames = j.value("min_frames", c.min_frames);
        c.max_frames = j.value("max_frames", c.max_frames);
        c.summary_frames = j.value("summary_frames", c.summary_frames);
        c.detector_endpoint = j.value("detector_endpoint", c.detector_endpoint);
        if (j.contains("cache_dir")) c.cache_dir = resolve(j["cache_dir"].get<std::string>());
        if (j.contains("trace_dir")) c.trace_dir = resolve(j["trace_dir"].get<std::string>());
        c.parallel_tasks = j.value("parallel_tasks", c.parallel_tasks);
        c.detection_threshold = j.value("detection_threshold", c.detection_threshold);
        if (j.contains("gap_bridge_frames")) {
            c.gap_bridge_frames = j["gap_bridge_frames"].is_null() ? std::nullopt
                                                                    : std::optional<int>(j["gap_bridge_frames"].get<int>());
        }
        c.max_detection_frames = j.value("max_detection_frames", c.max_detection_frames);
        c.detector_parallelism = j.value("detector_parallelism", c.detector_parallelism);
        c.max_subquestions = j.value("max_subquestions", c.max_subquestions);
        c.max_refinement_adds = j.value("max_refinement_adds", c.max_refinement_adds);
        if (j.contains("max_output")) {
            c.max_output = j["max_output"].is_null() ? std::nullopt : std::optional<int>(j["max_output"].get<int>());
        }
        if (j.contains("backends")) {
            c.backends.clear();
            for (const auto& [id, bj] : j["backends"].items()) {
                c.backends[id] = backend_from_json(bj);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig default_config() {
    PipelineConfig c;
    HttpBackendConfig openai;
    openai.shape = ProviderShape::openai_chat;
    openai.endpoint = "https://api.openai.com/v1/chat/completions";
    openai.model = "gpt-4.1-2025-04-14";
    openai.auth_header = "Authorization";
    openai.auth_prefix = "Bearer ";
    openai.api_key_env = "OPENAI_API_KEY";
    c.backends["gpt-4.1"] = openai;

    HttpBackendConfig gemini;
    gemini.shape = ProviderShape::gemini_generate;
    gemini.endpoint = "https://generativelanguage.googleapis.com/v1beta/models/{model}:generateContent";
    gemini.model = "gemini-2.5-pro";
    gemini.auth_header = "x-goog-api-key";
    gemini.auth_prefix = "";
    gemini.api_key_env = "GEMINI_API_KEY";
    c.backends["gemini-2.5-pro"] = gemini;
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigurationError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ConfigurationError(e.what());
    }
    return PipelineConfig::from_json(j, path.parent_path());
}

} // namespace dive
