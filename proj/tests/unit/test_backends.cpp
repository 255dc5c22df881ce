#include "dive/backend.hpp"
#include "dive/cache.hpp"
#include "dive/errors.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <thread>

using namespace dive;

namespace {

CompletionRequest make_request(std::string text, double temperature = 0.0) {
    CompletionRequest r;
    r.backend_id = "agent";
    r.role_temperature = temperature;
    r.messages = {{Role::system, "[stage=intent] sys"}, {Role::user, std::move(text)}};
    return r;
}

} // namespace

TEST_CASE("cache_key is stable and covers every field") {
    const auto base = make_request("what happens?");
    CHECK(cache_key(base) == cache_key(make_request("what happens?")));
    CHECK(cache_key(base).size() == 64);

    CHECK(cache_key(base) != cache_key(make_request("what happens?", 1.0)));

    auto with_attachment = base;
    with_attachment.attachments.push_back({MediaKind::image, "abc", "/x.ppm"});
    CHECK(cache_key(base) != cache_key(with_attachment));

    auto other_backend = base;
    other_backend.backend_id = "judge";
    CHECK(cache_key(base) != cache_key(other_backend));

    auto swapped_roles = base;
    swapped_roles.messages[0].role = Role::user;
    CHECK(cache_key(base) != cache_key(swapped_roles));

    auto with_limit = base;
    with_limit.max_output = 256;
    CHECK(cache_key(base) != cache_key(with_limit));

    auto reordered = with_attachment;
    reordered.attachments.push_back({MediaKind::image, "def", "/y.ppm"});
    auto reordered2 = reordered;
    std::swap(reordered2.attachments[0], reordered2.attachments[1]);
    CHECK(cache_key(reordered) != cache_key(reordered2));
}

TEST_CASE("scripted backend: first matching rule wins, unmatched throws") {
    ScriptedBackend backend;
    backend.add_rule({ScriptedBackend::contains_all({"[stage=intent]", "dog"}), {"dog intent"}, "specific"});
    backend.add_rule({ScriptedBackend::contains_all({"[stage=intent]"}), {"generic intent"}, "generic"});

    CHECK(backend.complete(make_request("is there a dog?")).text == "dog intent");
    CHECK(backend.complete(make_request("is there a cat?")).text == "generic intent");

    auto unmatched = make_request("x");
    unmatched.messages[0].text = "[stage=final]";
    CHECK_THROWS_AS(backend.complete(unmatched), UnmatchedRequestError);
}

TEST_CASE("scripted backend from JSON: sequences, backend and attachment filters") {
    auto backend = ScriptedBackend::from_json(nlohmann::json::parse(R"({
      "rules": [
        {"contains": "[stage=intent]", "backend": "other", "response": "wrong backend"},
        {"contains": ["[stage=intent]"], "min_images": 1, "response": "with images"},
        {"contains": "[stage=intent]", "responses": ["first", "second"]}
      ]})"));
    auto req = make_request("q");
    CHECK(backend->complete(req).text == "first");
    CHECK(backend->complete(req).text == "second");
    CHECK(backend->complete(req).text == "second");
    req.attachments.push_back({MediaKind::image, "d", "/p"});
    CHECK(backend->complete(req).text == "with images");

    CHECK_THROWS_AS(ScriptedBackend::from_json(nlohmann::json::parse(R"({"rules":[{"contains":"x"}]})")),
                    ValidationError);
}

TEST_CASE("request validation") {
    ScriptedBackend backend({{[](const CompletionRequest&) { return true; }, {"ok"}, "any"}});
    auto hot = make_request("q", 2.5);
    CHECK_THROWS_AS(backend.complete(hot), ArgumentError);
    CompletionRequest empty;
    empty.backend_id = "agent";
    CHECK_THROWS_AS(backend.complete(empty), ArgumentError);
}

TEST_CASE("registry routes by id and rejects unknown backends") {
    auto a = std::make_shared<ScriptedBackend>(
        std::vector<ScriptedBackend::Rule>{{[](const CompletionRequest&) { return true; }, {"from a"}, "a"}});
    BackendRegistry registry;
    registry.add("agent", a);
    CHECK(registry.complete(make_request("q")).text == "from a");
    auto req = make_request("q");
    req.backend_id = "missing";
    CHECK_THROWS_AS(registry.complete(req), ConfigurationError);
}

TEST_CASE("cached client: warm cache returns identical text without reaching the backend") {
    testing::TempDir dir;
    auto scripted = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{
        {[](const CompletionRequest&) { return true; }, {"canned intent", "a different reply"}, "any"}});
    auto counting = std::make_shared<CountingClient>(scripted);
    auto cache = std::make_shared<CompletionCache>(dir.path());
    CachedClient cached(counting, cache);

    const auto cold = cached.complete(make_request("q"));
    CHECK_FALSE(cold.from_cache);
    const auto warm = cached.complete(make_request("q"));
    CHECK(warm.from_cache);
    CHECK(warm.text == cold.text);
    CHECK(counting->calls() == 1);

    // a second client over the same directory sees the entry too
    CachedClient again(counting, std::make_shared<CompletionCache>(dir.path()));
    CHECK(again.complete(make_request("q")).text == "canned intent");
    CHECK(counting->calls() == 1);
}

TEST_CASE("cache writes are safe under concurrent use") {
    testing::TempDir dir;
    auto scripted = std::make_shared<ScriptedBackend>(std::vector<ScriptedBackend::Rule>{
        {[](const CompletionRequest& r) { return true; }, {"same"}, "any"}});
    CachedClient cached(scripted, std::make_shared<CompletionCache>(dir.path()));
    std::vector<std::jthread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < 25; ++i) {
                CHECK(cached.complete(make_request("q" + std::to_string(i % 5))).text == "same");
            }
        });
    }
    threads.clear();
    std::size_t files = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path())) {
        if (e.is_regular_file()) {
            CHECK(e.path().extension() == ".json");
            ++files;
        }
    }
    CHECK(files == 5);
}

TEST_CASE("traced_complete records successes and failures") {
    TraceLog trace;
    ScriptedBackend backend({{ScriptedBackend::contains_all({"ok"}), {"fine"}, "ok"}});
    const auto req = make_request("ok");
    traced_complete(backend, req, &trace, TraceStep::intent);
    CHECK_THROWS_AS(traced_complete(backend, make_request("nope"), &trace, TraceStep::final), UnmatchedRequestError);
    const auto events = trace.events();
    REQUIRE(events.size() == 2);
    CHECK(events[0].seq == 0);
    CHECK(events[1].seq == 1);
    CHECK(events[0].output == "fine");
    CHECK(events[0].actor == "agent");
    CHECK(events[0].input_digest == cache_key(req));
    CHECK(events[1].error.has_value());
}
