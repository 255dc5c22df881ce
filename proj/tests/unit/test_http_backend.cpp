#include "dive/digest.hpp"
#include "dive/errors.hpp"
#include "dive/http_backend.hpp"

#include "fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

using namespace dive;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class LocalServer {
public:
    LocalServer() {
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    httplib::Server& server() { return server_; }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

CompletionRequest request_with_frames(const testing::TempDir& dir, bool audio) {
    std::ofstream(dir / "f0.png", std::ios::binary) << "png-bytes";
    std::ofstream(dir / "a.wav", std::ios::binary) << "wav-bytes";
    CompletionRequest r;
    r.backend_id = "tool";
    r.role_temperature = 1.0;
    r.max_output = 64;
    r.messages = {{Role::system, "system text"}, {Role::user, "what is shown?"}};
    r.attachments.push_back({MediaKind::image, "d0", dir / "f0.png"});
    if (audio) {
        r.attachments.push_back({MediaKind::audio, "d1", dir / "a.wav"});
    }
    return r;
}

} // namespace

TEST_CASE("openai_chat adapter maps messages, images and limits") {
    testing::TempDir dir;
    HttpBackendConfig cfg;
    cfg.shape = ProviderShape::openai_chat;
    cfg.model = "m1";
    const auto body = build_provider_body(cfg, request_with_frames(dir, false));
    CHECK(body["model"] == "m1");
    CHECK(body["temperature"] == 1.0);
    CHECK(body["max_tokens"] == 64);
    CHECK(body["messages"][0]["content"] == "system text");
    const auto& parts = body["messages"][1]["content"];
    CHECK(parts[0]["text"] == "what is shown?");
    CHECK(parts[1]["image_url"]["url"] == "data:image/png;base64," + base64_encode("png-bytes"));

    CHECK_THROWS_AS(build_provider_body(cfg, request_with_frames(dir, true)), ConfigurationError);
}

TEST_CASE("gemini_generate adapter carries audio and the system instruction") {
    testing::TempDir dir;
    HttpBackendConfig cfg;
    cfg.shape = ProviderShape::gemini_generate;
    const auto body = build_provider_body(cfg, request_with_frames(dir, true));
    CHECK(body["systemInstruction"]["parts"][0]["text"] == "system text");
    CHECK(body["generationConfig"]["temperature"] == 1.0);
    CHECK(body["generationConfig"]["maxOutputTokens"] == 64);
    const auto& parts = body["contents"][0]["parts"];
    REQUIRE(parts.size() == 3);
    CHECK(parts[1]["inline_data"]["mime_type"] == "image/png");
    CHECK(parts[2]["inline_data"]["mime_type"] == "audio/wav");
    CHECK(parts[2]["inline_data"]["data"] == base64_encode("wav-bytes"));
}

TEST_CASE("provider responses parse, malformed ones are protocol errors") {
    auto r = parse_provider_body(ProviderShape::openai_chat, nlohmann::json::parse(
        R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}})"));
    CHECK(r.text == "hi");
    CHECK(r.token_usage->prompt == 3);
    auto g = parse_provider_body(ProviderShape::gemini_generate, nlohmann::json::parse(
        R"({"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}],"usageMetadata":{"promptTokenCount":5,"candidatesTokenCount":2}})"));
    CHECK(g.text == "ab");
    CHECK(g.token_usage->completion == 2);
    CHECK_THROWS_AS(parse_provider_body(ProviderShape::openai_chat, nlohmann::json::parse(R"({"error":"x"})")),
                    ProtocolError);
}

TEST_CASE("live backend retries transient failures with exponential backoff") {
    LocalServer srv;
    std::atomic<int> hits{0};
    std::string auth_seen;
    srv.server().Post("/v1/chat", [&](const httplib::Request& req, httplib::Response& res) {
        auth_seen = req.get_header_value("Authorization");
        if (++hits <= 2) {
            res.status = 503;
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"answer"}}]})", "application/json");
    });
    ::setenv("DIVE_TEST_KEY", "sk-test", 1);

    HttpBackendConfig cfg;
    cfg.endpoint = srv.url("/v1/chat");
    cfg.model = "m";
    cfg.api_key_env = "DIVE_TEST_KEY";
    std::vector<long> sleeps;
    HttpChatBackend backend(cfg, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });

    CompletionRequest req;
    req.backend_id = "live";
    req.messages = {{Role::user, "q"}};
    CHECK(backend.complete(req).text == "answer");
    CHECK(hits == 3);
    CHECK(sleeps == std::vector<long>{1000, 4000});
    CHECK(auth_seen == "Bearer sk-test");
}

TEST_CASE("live backend gives up after R retries with the last status") {
    LocalServer srv;
    std::atomic<int> hits{0};
    srv.server().Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
    });
    HttpBackendConfig cfg;
    cfg.endpoint = srv.url("/v1/chat");
    std::vector<long> sleeps;
    HttpChatBackend backend(cfg, [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); });
    CompletionRequest req;
    req.backend_id = "live";
    req.messages = {{Role::user, "q"}};
    try {
        backend.complete(req);
        FAIL("expected UpstreamError");
    } catch (const UpstreamError& e) {
        CHECK(e.status() == 500);
    }
    CHECK(hits == 4);
    CHECK(sleeps == std::vector<long>{1000, 4000, 16000});
}

TEST_CASE("client errors are not retried; missing credentials are configuration errors") {
    LocalServer srv;
    std::atomic<int> hits{0};
    srv.server().Post("/v1/chat", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
    });
    HttpBackendConfig cfg;
    cfg.endpoint = srv.url("/v1/chat");
    HttpChatBackend backend(cfg, [](std::chrono::milliseconds) {});
    CompletionRequest req;
    req.backend_id = "live";
    req.messages = {{Role::user, "q"}};
    CHECK_THROWS_AS(backend.complete(req), UpstreamError);
    CHECK(hits == 1);

    cfg.api_key_env = "DIVE_TEST_KEY_THAT_IS_NOT_SET";
    HttpChatBackend needs_key(cfg, [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(needs_key.complete(req), ConfigurationError);
}

TEST_CASE("detector client speaks the /detect and /health protocol") {
    testing::TempDir dir;
    std::ofstream(dir / "frame.ppm", std::ios::binary) << "P6 frame";
    const FrameRef frame{0, 0.0, dir / "frame.ppm", "digest"};

    LocalServer srv;
    nlohmann::json seen;
    srv.server().Post("/detect", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        res.set_content(R"({"detections":[{"label":"dog","bbox":[0.1,0.2,0.3,0.4],"confidence":0.9}]})",
                        "application/json");
    });
    srv.server().Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok","model":"mock"})", "application/json");
    });

    HttpDetectorClient client(srv.url(""));
    const auto dets = client.detect(frame, {"dog", "ball"}, 0.25);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].label == "dog");
    CHECK(dets[0].bbox == BoundingBox{0.1, 0.2, 0.3, 0.4});
    CHECK(seen["image"] == base64_encode("P6 frame"));
    CHECK(seen["labels"] == nlohmann::json{"dog", "ball"});
    CHECK(seen["threshold"] == 0.25);
    CHECK(client.health()["status"] == "ok");
}

TEST_CASE("detector client error mapping") {
    testing::TempDir dir;
    std::ofstream(dir / "frame.ppm", std::ios::binary) << "x";
    const FrameRef frame{0, 0.0, dir / "frame.ppm", "digest"};

    LocalServer srv;
    std::string mode;
    srv.server().Post("/detect", [&](const httplib::Request&, httplib::Response& res) {
        if (mode == "400") {
            res.status = 400;
            res.set_content(R"({"error":"empty labels"})", "application/json");
        } else if (mode == "500") {
            res.status = 500;
        } else if (mode == "box") {
            res.set_content(R"({"detections":[{"label":"dog","bbox":[0.5,0.2,0.3,1.4],"confidence":0.9}]})",
                            "application/json");
        } else {
            res.set_content("not json", "text/plain");
        }
    });
    HttpDetectorClient client(srv.url(""));
    mode = "400";
    CHECK_THROWS_AS(client.detect(frame, {"dog"}, 0.3), ProtocolError);
    mode = "500";
    CHECK_THROWS_AS(client.detect(frame, {"dog"}, 0.3), ExternalServiceError);
    mode = "box";
    CHECK_THROWS_AS(client.detect(frame, {"dog"}, 0.3), ProtocolError);
    mode = "garbage";
    CHECK_THROWS_AS(client.detect(frame, {"dog"}, 0.3), ProtocolError);

    HttpDetectorClient unreachable("http://127.0.0.1:1", 1.0);
    CHECK_THROWS_AS(unreachable.detect(frame, {"dog"}, 0.3), ExternalServiceError);
    CHECK_THROWS_AS(unreachable.health(), ExternalServiceError);
}
