#pragma once

#include "dive/trace.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dive {

enum class Role { system, user, assistant };
std::string_view to_string(Role r);

struct Message {
    Role role = Role::user;
    std::string text;
};

enum class MediaKind { image, audio };
std::string_view to_string(MediaKind k);

// Media is referenced by digest plus local path; bytes are only read by live
// adapters at send time.
struct Attachment {
    MediaKind kind = MediaKind::image;
    std::string digest;
    std::filesystem::path path;
};

struct CompletionRequest {
    std::string backend_id;
    double role_temperature = 0.0;
    std::vector<Message> messages;
    std::vector<Attachment> attachments;
    std::optional<int> max_output;

    /// Throws ArgumentError on empty messages or temperature outside [0,2].
    void validate() const;

    /// All message texts joined by newlines; what script matchers look at.
    std::string text() const;

    std::size_t image_count() const;
    bool has_audio() const;
};

struct CompletionResponse {
    std::string text;
    std::optional<TokenUsage> token_usage;
    bool from_cache = false;
};

/// Stable digest over every request field, in order.
std::string cache_key(const CompletionRequest& request);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

// Deterministic test double. Rules are tried in order and the first match
// wins. A rule with several responses hands them out in turn (the last one
// repeats once exhausted). Unmatched requests throw UnmatchedRequestError.
class ScriptedBackend final : public ChatClient {
public:
    using Matcher = std::function<bool(const CompletionRequest&)>;

    struct Rule {
        Matcher matcher;
        std::vector<std::string> responses;
        std::string description;
    };

    ScriptedBackend() = default;
    explicit ScriptedBackend(std::vector<Rule> rules);

    /// Script file: {"rules": [{"contains": str|[str], "backend": str?,
    /// "min_images": int?, "audio": bool?, "response": str | "responses": [str]}]}.
    static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
    static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

    /// Rule matching when every needle occurs in the request text.
    static Matcher contains_all(std::vector<std::string> needles);

    void add_rule(Rule rule);
    CompletionResponse complete(const CompletionRequest& request) override;

private:
    struct Slot {
        Rule rule;
        std::size_t served = 0;
    };
    std::mutex mutex_;
    std::vector<Slot> rules_;
};

// Counts calls that reach the wrapped client.
class CountingClient final : public ChatClient {
public:
    explicit CountingClient(std::shared_ptr<ChatClient> inner) : inner_(std::move(inner)) {}
    CompletionResponse complete(const CompletionRequest& request) override;
    long calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<ChatClient> inner_;
    std::atomic<long> calls_{0};
};

// Routes by backend_id. Unknown ids throw ConfigurationError.
class BackendRegistry final : public ChatClient {
public:
    void add(std::string backend_id, std::shared_ptr<ChatClient> client);
    bool has(std::string_view backend_id) const;
    std::vector<std::string> ids() const;
    CompletionResponse complete(const CompletionRequest& request) override;

private:
    std::map<std::string, std::shared_ptr<ChatClient>, std::less<>> clients_;
};

/// One completion recorded as a trace event. Failures are recorded with the
/// error text and rethrown.
CompletionResponse traced_complete(ChatClient& client, const CompletionRequest& request, TraceLog* trace,
                                   TraceStep step);

} // namespace dive
