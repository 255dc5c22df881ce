#include "dive/http_backend.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <thread>

namespace dive {

ProviderShape provider_shape_from_string(std::string_view s) {
    if (s == "openai_chat") {
        return ProviderShape::openai_chat;
    }
    if (s == "gemini_generate") {
        return ProviderShape::gemini_generate;
    }
    throw ConfigurationError("unknown provider shape '" + std::string(s) + "'");
}

std::string_view to_string(ProviderShape s) {
    return s == ProviderShape::openai_chat ? "openai_chat" : "gemini_generate";
}

std::string mime_type_for(const std::filesystem::path& path, MediaKind kind) {
    auto ext = path.extension().string();
    for (auto& c : ext) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (kind == MediaKind::image) {
        if (ext == ".png") return "image/png";
        if (ext == ".webp") return "image/webp";
        if (ext == ".ppm") return "image/x-portable-pixmap";
        return "image/jpeg";
    }
    if (ext == ".mp3") return "audio/mpeg";
    if (ext == ".flac") return "audio/flac";
    if (ext == ".m4a" || ext == ".aac") return "audio/aac";
    if (ext == ".ogg") return "audio/ogg";
    return "audio/wav";
}

namespace {

nlohmann::json openai_body(const HttpBackendConfig& cfg, const CompletionRequest& req) {
    auto messages = nlohmann::json::array();
    std::size_t last_user = req.messages.size();
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        if (req.messages[i].role == Role::user) {
            last_user = i;
        }
    }
    if (!req.attachments.empty() && last_user == req.messages.size()) {
        throw ArgumentError("attachments need a user message to ride on");
    }
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        const auto& m = req.messages[i];
        if (i != last_user || req.attachments.empty()) {
            messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
            continue;
        }
        auto parts = nlohmann::json::array();
        parts.push_back({{"type", "text"}, {"text", m.text}});
        for (const auto& a : req.attachments) {
            if (a.kind != MediaKind::image) {
                throw ConfigurationError("provider shape openai_chat does not accept audio attachments");
            }
            const auto url = "data:" + mime_type_for(a.path, a.kind) + ";base64," + base64_encode(read_file(a.path));
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", url}}}});
        }
        messages.push_back({{"role", to_string(m.role)}, {"content", std::move(parts)}});
    }
    nlohmann::json body = {{"model", cfg.model}, {"temperature", req.role_temperature}, {"messages", messages}};
    if (req.max_output) {
        body["max_tokens"] = *req.max_output;
    }
    return body;
}

nlohmann::json gemini_body(const HttpBackendConfig&, const CompletionRequest& req) {
    std::string system;
    auto contents = nlohmann::json::array();
    std::size_t last_user = req.messages.size();
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        if (req.messages[i].role == Role::user) {
            last_user = i;
        }
    }
    if (!req.attachments.empty() && last_user == req.messages.size()) {
        throw ArgumentError("attachments need a user message to ride on");
    }
    for (std::size_t i = 0; i < req.messages.size(); ++i) {
        const auto& m = req.messages[i];
        if (m.role == Role::system) {
            system += (system.empty() ? "" : "\n") + m.text;
            continue;
        }
        auto parts = nlohmann::json::array();
        parts.push_back({{"text", m.text}});
        if (i == last_user) {
            for (const auto& a : req.attachments) {
                parts.push_back({{"inline_data",
                                  {{"mime_type", mime_type_for(a.path, a.kind)},
                                   {"data", base64_encode(read_file(a.path))}}}});
            }
        }
        contents.push_back({{"role", m.role == Role::assistant ? "model" : "user"}, {"parts", std::move(parts)}});
    }
    nlohmann::json generation = {{"temperature", req.role_temperature}};
    if (req.max_output) {
        generation["maxOutputTokens"] = *req.max_output;
    }
    nlohmann::json body = {{"contents", std::move(contents)}, {"generationConfig", std::move(generation)}};
    if (!system.empty()) {
        body["systemInstruction"] = {{"parts", {{{"text", system}}}}};
    }
    return body;
}

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigurationError("endpoint is not an absolute URL: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool is_transient(int status) {
    return status == 0 || status == 408 || status == 429 || status >= 500;
}

} // namespace

nlohmann::json build_provider_body(const HttpBackendConfig& cfg, const CompletionRequest& request) {
    return cfg.shape == ProviderShape::openai_chat ? openai_body(cfg, request) : gemini_body(cfg, request);
}

CompletionResponse parse_provider_body(ProviderShape shape, const nlohmann::json& body) {
    CompletionResponse r;
    try {
        if (shape == ProviderShape::openai_chat) {
            const auto& content = body.at("choices").at(0).at("message").at("content");
            r.text = content.is_null() ? "" : content.get<std::string>();
            if (body.contains("usage")) {
                r.token_usage = TokenUsage{body["usage"].value("prompt_tokens", 0L),
                                           body["usage"].value("completion_tokens", 0L)};
            }
        } else {
            for (const auto& part : body.at("candidates").at(0).at("content").at("parts")) {
                if (part.contains("text")) {
                    r.text += part["text"].get<std::string>();
                }
            }
            if (body.contains("usageMetadata")) {
                r.token_usage = TokenUsage{body["usageMetadata"].value("promptTokenCount", 0L),
                                           body["usageMetadata"].value("candidatesTokenCount", 0L)};
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("unexpected provider response: ") + e.what());
    }
    return r;
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    if (config_.retries < 0) {
        throw ConfigurationError("retries must be >= 0");
    }
}

CompletionResponse HttpChatBackend::complete(const CompletionRequest& request) {
    request.validate();
    auto endpoint = config_.endpoint;
    if (const auto pos = endpoint.find("{model}"); pos != std::string::npos) {
        endpoint.replace(pos, 7, config_.model);
    }
    const auto url = split_url(endpoint);
    const auto body = build_provider_body(config_, request).dump();

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw ConfigurationError("credential variable " + config_.api_key_env + " is not set");
        }
        headers.emplace(config_.auth_header, config_.auth_prefix + key);
    }

    int last_status = 0;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0) {
            const double delay = config_.backoff_base_s * std::pow(config_.backoff_factor, attempt - 1);
            spdlog::warn("backend {}: attempt {} failed ({}), retrying in {:.1f}s", request.backend_id, attempt,
                         last_error, delay);
            sleeper_(std::chrono::milliseconds(static_cast<long>(delay * 1000.0)));
        }
        httplib::Client client(url.origin);
        const auto timeout = std::chrono::milliseconds(static_cast<long>(config_.timeout_s * 1000.0));
        client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
        client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
        auto res = client.Post(url.path, headers, body, "application/json");
        if (!res) {
            last_status = 0;
            last_error = "transport: " + httplib::to_string(res.error());
            continue;
        }
        last_status = res->status;
        if (res->status == 200) {
            try {
                return parse_provider_body(config_.shape, nlohmann::json::parse(res->body));
            } catch (const nlohmann::json::parse_error& e) {
                throw ProtocolError(std::string("provider returned invalid JSON: ") + e.what());
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (!is_transient(res->status)) {
            break;
        }
    }
    throw UpstreamError("backend " + request.backend_id + " failed: " + last_error, last_status);
}

} // namespace dive
