#pragma once

#include "dive/http_backend.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace dive {

struct PipelineConfig {
    int max_rounds = 25;
    double agent_temperature = 0.0;
    double tool_temperature = 1.0;

    // backend ids per role
    std::string agent_backend = "gpt-4.1";
    std::string whole_video_backend = "gemini-2.5-pro";
    std::string key_segments_backend = "gpt-4.1";
    std::string summary_backend = "gpt-4.1";
    std::string judge_backend = "gpt-4.1";

    // frame budgets
    int min_frames = 8;
    int max_frames = 16;
    int summary_frames = 32;

    std::string detector_endpoint;
    std::filesystem::path cache_dir;
    std::filesystem::path trace_dir;
    int parallel_tasks = 1;

    double detection_threshold = 0.3;
    std::optional<int> gap_bridge_frames;  // default: floor(fps / 2)
    int max_detection_frames = 3000;
    int detector_parallelism = 4;

    int max_subquestions = 6;
    int max_refinement_adds = 3;
    std::optional<int> max_output;

    std::map<std::string, HttpBackendConfig> backends;

    /// Throws ConfigurationError when an invariant is broken.
    void validate() const;

    /// Every role's backend id, deduplicated.
    std::vector<std::string> role_backends() const;

    nlohmann::json to_json() const;

    /// Missing keys keep their defaults; unknown keys are rejected. Relative
    /// cache_dir / trace_dir resolve against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
};

/// Default config plus the two stock live backends.
PipelineConfig default_config();

PipelineConfig load_config(const std::filesystem::path& path);

} // namespace dive
