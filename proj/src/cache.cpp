#include "dive/cache.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <spdlog/spdlog.h>

namespace dive {

CompletionCache::CompletionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path CompletionCache::file_for(const std::string& key) const {
    // two-level fan-out keeps directories small on large benchmark runs
    return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<CompletionResponse> CompletionCache::load(const std::string& key) const {
    const auto path = file_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        return std::nullopt;
    }
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        CompletionResponse r;
        r.text = j.at("text").get<std::string>();
        if (j.contains("token_usage") && !j["token_usage"].is_null()) {
            r.token_usage = TokenUsage{j["token_usage"].at("prompt").get<long>(),
                                       j["token_usage"].at("completion").get<long>()};
        }
        r.from_cache = true;
        return r;
    } catch (const std::exception& e) {
        spdlog::warn("ignoring corrupt cache entry {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

void CompletionCache::store(const std::string& key, const CompletionResponse& response) const {
    nlohmann::json j = {
        {"text", response.text},
        {"token_usage", response.token_usage ? nlohmann::json{{"prompt", response.token_usage->prompt},
                                                                {"completion", response.token_usage->completion}}
                                             : nlohmann::json(nullptr)},
    };
    write_file_atomic(file_for(key), j.dump());
}

CompletionResponse CachedClient::complete(const CompletionRequest& request) {
    request.validate();
    const auto key = cache_key(request);
    if (auto hit = cache_->load(key)) {
        return *hit;
    }
    auto response = inner_->complete(request);
    response.from_cache = false;
    cache_->store(key, response);
    return response;
}

} // namespace dive
