#include "dive/backend.hpp"

#include "dive/digest.hpp"
#include "dive/errors.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace dive {

std::string_view to_string(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "?";
}

std::string_view to_string(MediaKind k) {
    return k == MediaKind::image ? "image" : "audio";
}

void CompletionRequest::validate() const {
    if (messages.empty()) {
        throw ArgumentError("completion request without messages");
    }
    if (!(role_temperature >= 0.0 && role_temperature <= 2.0)) {
        throw ArgumentError(fmt::format("temperature {} outside [0,2]", role_temperature));
    }
    if (max_output && *max_output <= 0) {
        throw ArgumentError("max_output must be positive");
    }
}

std::string CompletionRequest::text() const {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty()) {
            out += '\n';
        }
        out += m.text;
    }
    return out;
}

std::size_t CompletionRequest::image_count() const {
    return static_cast<std::size_t>(std::count_if(attachments.begin(), attachments.end(),
                                                  [](const Attachment& a) { return a.kind == MediaKind::image; }));
}

bool CompletionRequest::has_audio() const {
    return std::any_of(attachments.begin(), attachments.end(),
                       [](const Attachment& a) { return a.kind == MediaKind::audio; });
}

std::string cache_key(const CompletionRequest& request) {
    auto messages = nlohmann::json::array();
    for (const auto& m : request.messages) {
        messages.push_back({to_string(m.role), m.text});
    }
    auto attachments = nlohmann::json::array();
    for (const auto& a : request.attachments) {
        attachments.push_back({to_string(a.kind), a.digest});
    }
    // The temperature is rendered as text so 0.0 and 1.0 stay distinct
    // regardless of JSON number formatting.
    const nlohmann::json canonical = {
        {"v", 1},
        {"backend_id", request.backend_id},
        {"temperature", fmt::format("{:.6f}", request.role_temperature)},
        {"messages", std::move(messages)},
        {"attachments", std::move(attachments)},
        {"max_output", request.max_output ? nlohmann::json(*request.max_output) : nlohmann::json(nullptr)},
    };
    return sha256_hex(canonical.dump());
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules) {
    for (auto& r : rules) {
        add_rule(std::move(r));
    }
}

void ScriptedBackend::add_rule(Rule rule) {
    if (rule.responses.empty()) {
        throw ArgumentError("script rule without a response: " + rule.description);
    }
    std::lock_guard lock(mutex_);
    rules_.push_back(Slot{std::move(rule), 0});
}

ScriptedBackend::Matcher ScriptedBackend::contains_all(std::vector<std::string> needles) {
    return [needles = std::move(needles)](const CompletionRequest& req) {
        const auto text = req.text();
        return std::all_of(needles.begin(), needles.end(),
                           [&](const std::string& n) { return text.find(n) != std::string::npos; });
    };
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::json& script) {
    auto backend = std::make_shared<ScriptedBackend>();
    try {
        int index = 0;
        for (const auto& r : script.at("rules")) {
            std::vector<std::string> needles;
            if (r.contains("contains")) {
                if (r["contains"].is_string()) {
                    needles.push_back(r["contains"].get<std::string>());
                } else {
                    needles = r["contains"].get<std::vector<std::string>>();
                }
            }
            std::optional<std::string> backend_id;
            if (r.contains("backend")) {
                backend_id = r["backend"].get<std::string>();
            }
            std::optional<std::size_t> min_images;
            if (r.contains("min_images")) {
                min_images = r["min_images"].get<std::size_t>();
            }
            std::optional<bool> audio;
            if (r.contains("audio")) {
                audio = r["audio"].get<bool>();
            }
            std::vector<std::string> responses;
            if (r.contains("responses")) {
                responses = r["responses"].get<std::vector<std::string>>();
            } else {
                responses.push_back(r.at("response").get<std::string>());
            }
            auto text_match = contains_all(needles);
            Rule rule;
            rule.matcher = [=](const CompletionRequest& req) {
                if (backend_id && req.backend_id != *backend_id) {
                    return false;
                }
                if (min_images && req.image_count() < *min_images) {
                    return false;
                }
                if (audio && req.has_audio() != *audio) {
                    return false;
                }
                return text_match(req);
            };
            rule.responses = std::move(responses);
            rule.description = r.value("name", fmt::format("rule #{}", index));
            backend->add_rule(std::move(rule));
            ++index;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("script: ") + e.what());
    }
    return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

CompletionResponse ScriptedBackend::complete(const CompletionRequest& request) {
    request.validate();
    std::lock_guard lock(mutex_);
    for (auto& slot : rules_) {
        if (slot.rule.matcher(request)) {
            const auto i = std::min(slot.served, slot.rule.responses.size() - 1);
            ++slot.served;
            return CompletionResponse{slot.rule.responses[i], std::nullopt, false};
        }
    }
    auto text = request.text();
    if (text.size() > 160) {
        text = text.substr(0, 160) + "...";
    }
    throw UnmatchedRequestError("no script rule matches request to '" + request.backend_id + "': " + text);
}

CompletionResponse CountingClient::complete(const CompletionRequest& request) {
    ++calls_;
    return inner_->complete(request);
}

void BackendRegistry::add(std::string backend_id, std::shared_ptr<ChatClient> client) {
    clients_[std::move(backend_id)] = std::move(client);
}

bool BackendRegistry::has(std::string_view backend_id) const {
    return clients_.find(backend_id) != clients_.end();
}

std::vector<std::string> BackendRegistry::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : clients_) {
        out.push_back(id);
    }
    return out;
}

CompletionResponse BackendRegistry::complete(const CompletionRequest& request) {
    auto it = clients_.find(request.backend_id);
    if (it == clients_.end()) {
        throw ConfigurationError("backend '" + request.backend_id + "' is not configured");
    }
    return it->second->complete(request);
}

CompletionResponse traced_complete(ChatClient& client, const CompletionRequest& request, TraceLog* trace,
                                   TraceStep step) {
    TraceEvent event;
    event.step = step;
    event.actor = request.backend_id;
    event.input_digest = cache_key(request);
    event.started_at = utc_now_iso();
    try {
        auto response = client.complete(request);
        if (trace != nullptr) {
            event.ended_at = utc_now_iso();
            event.output = response.text;
            event.token_usage = response.token_usage;
            trace->append(std::move(event));
        }
        return response;
    } catch (const std::exception& e) {
        if (trace != nullptr) {
            event.ended_at = utc_now_iso();
            event.error = e.what();
            trace->append(std::move(event));
        }
        throw;
    }
}

} // namespace dive
