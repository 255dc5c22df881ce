#pragma once

#include "dive/backend.hpp"

#include <filesystem>
#include <optional>

namespace dive {

// Content-addressed completion cache: one JSON file per request digest.
class CompletionCache {
public:
    explicit CompletionCache(std::filesystem::path dir);

    std::optional<CompletionResponse> load(const std::string& key) const;
    void store(const std::string& key, const CompletionResponse& response) const;
    const std::filesystem::path& dir() const noexcept { return dir_; }

private:
    std::filesystem::path file_for(const std::string& key) const;
    std::filesystem::path dir_;
};

// Read-through cache decorator. Hits never reach the inner client.
class CachedClient final : public ChatClient {
public:
    CachedClient(std::shared_ptr<ChatClient> inner, std::shared_ptr<CompletionCache> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}
    CompletionResponse complete(const CompletionRequest& request) override;

private:
    std::shared_ptr<ChatClient> inner_;
    std::shared_ptr<CompletionCache> cache_;
};

} // namespace dive
