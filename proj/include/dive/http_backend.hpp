#pragma once

#include "dive/backend.hpp"

#include <chrono>
#include <functional>
#include <string>

namespace dive {

// Wire shapes. openai_chat carries text and images; gemini_generate carries
// text, images and audio.
enum class ProviderShape { openai_chat, gemini_generate };

ProviderShape provider_shape_from_string(std::string_view s);
std::string_view to_string(ProviderShape s);

struct HttpBackendConfig {
    ProviderShape shape = ProviderShape::openai_chat;
    std::string endpoint;  // full URL; "{model}" is substituted
    std::string model;
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    std::string api_key_env;  // credential is read from this variable at call time
    int retries = 3;
    double backoff_base_s = 1.0;
    double backoff_factor = 4.0;
    double timeout_s = 180.0;
};

// Provider adapters, exposed for tests. Attachment bytes are read from disk here.
nlohmann::json build_provider_body(const HttpBackendConfig& cfg, const CompletionRequest& request);
CompletionResponse parse_provider_body(ProviderShape shape, const nlohmann::json& body);

std::string mime_type_for(const std::filesystem::path& path, MediaKind kind);

class HttpChatBackend final : public ChatClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpChatBackend(HttpBackendConfig config, Sleeper sleeper = {});
    CompletionResponse complete(const CompletionRequest& request) override;

private:
    HttpBackendConfig config_;
    Sleeper sleeper_;
};

} // namespace dive
