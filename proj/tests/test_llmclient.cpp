#include <catch2/catch_amalgamated.hpp>

#include <httplib.h>

#include <atomic>
#include <thread>

#include "fchprobe/llmclient.hpp"
#include "testutil.hpp"

using namespace fchprobe;
using llmclient::ChatResult;
using llmclient::Client;
using llmclient::Clock;
using llmclient::EndpointConfig;

namespace {

struct FakeClock {
    std::chrono::steady_clock::time_point now = std::chrono::steady_clock::time_point{};
    std::chrono::duration<double> slept{0};

    Clock clock() {
        return Clock{[this] { return now; },
                     [this](std::chrono::duration<double> d) {
                         slept += d;
                         now += std::chrono::duration_cast<std::chrono::steady_clock::duration>(d);
                     }};
    }
};

struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

std::string chat_body(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"content", text}}}}}}}.dump();
}

}  // namespace

TEST_CASE("cache keys are content-addressed") {
    CHECK(llmclient::cache_key("m", "p", 0.0) == llmclient::cache_key("m", "p", 0.0));
    CHECK(llmclient::cache_key("m", "p", 0.0) != llmclient::cache_key("m", "q", 0.0));
    CHECK(llmclient::cache_key("m", "p", 0.0) != llmclient::cache_key("n", "p", 0.0));
    CHECK(llmclient::cache_key("m", "p", 0.0) != llmclient::cache_key("m", "p", 0.5));
    CHECK(llmclient::cache_key("m", "p", 0.0).size() == 64);
}

TEST_CASE("second identical call is served from the cache") {
    testutil::TempDir dir("cache");
    EndpointConfig cfg;
    cfg.cache_dir = (dir.path() / "cache").string();
    Client client(cfg);
    std::atomic<int> backend_calls{0};
    client.set_backend([&](const std::string& prompt, const std::string&) {
        ++backend_calls;
        return "answer to " + prompt;
    });
    CHECK(client.chat("hello") == "answer to hello");
    CHECK(client.chat("hello") == "answer to hello");
    CHECK(backend_calls == 1);
    CHECK(client.chat("other") == "answer to other");
    CHECK(backend_calls == 2);
}

TEST_CASE("mock backend serves keyed fixtures with a synthesizer fallback") {
    testutil::TempDir dir("mock");
    testutil::write_file(dir.path() / "case-1.txt", "Yes. Canned answer.\n");
    llmclient::MockBackend mock(dir.path(), [](const std::string&, const std::string& hint) {
        return "synthesized for " + hint;
    });
    CHECK(mock("prompt", "case-1") == "Yes. Canned answer.");
    CHECK(mock("prompt", "case-2") == "synthesized for case-2");

    llmclient::MockBackend bare(dir.path());
    CHECK_THROWS_AS(bare("prompt", "case-2"), Error);
}

TEST_CASE("http chat retries on 429 and succeeds after backoff") {
    TestServer ts;
    std::atomic<int> hits{0};
    ts.server.Post("/v1/chat/completions",
                   [&](const httplib::Request&, httplib::Response& res) {
                       if (hits.fetch_add(1) == 0) {
                           res.status = 429;
                           return;
                       }
                       res.set_content(chat_body("recovered"), "application/json");
                   });
    ts.start();

    testutil::TempDir dir("retry");
    EndpointConfig cfg;
    cfg.base_url = ts.url();
    cfg.cache_dir = (dir.path() / "cache").string();
    FakeClock fake;
    Client client(cfg, fake.clock());
    CHECK(client.chat("prompt") == "recovered");
    CHECK(hits == 2);
    CHECK(fake.slept.count() >= cfg.backoff_base_s);
}

TEST_CASE("http chat surfaces auth failures and exhausted retries") {
    TestServer ts;
    ts.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 401;
    });
    ts.start();

    testutil::TempDir dir("auth");
    EndpointConfig cfg;
    cfg.base_url = ts.url();
    cfg.cache_dir = (dir.path() / "cache").string();
    FakeClock fake;
    Client client(cfg, fake.clock());
    CHECK_THROWS_WITH(client.chat("p"), Catch::Matchers::ContainsSubstring("authentication"));

    TestServer always_500;
    std::atomic<int> hits{0};
    always_500.server.Post("/v1/chat/completions",
                           [&](const httplib::Request&, httplib::Response& res) {
                               ++hits;
                               res.status = 500;
                           });
    always_500.start();
    EndpointConfig cfg2;
    cfg2.base_url = always_500.url();
    cfg2.cache_dir = (dir.path() / "cache2").string();
    FakeClock fake2;
    Client client2(cfg2, fake2.clock());
    CHECK_THROWS_WITH(client2.chat("p"), Catch::Matchers::ContainsSubstring("4 attempts"));
    CHECK(hits == 4);  // initial try plus three retries

    TestServer malformed;
    malformed.server.Post("/v1/chat/completions",
                          [&](const httplib::Request&, httplib::Response& res) {
                              res.set_content("{\"weird\": true}", "application/json");
                          });
    malformed.start();
    EndpointConfig cfg3;
    cfg3.base_url = malformed.url();
    cfg3.cache_dir = (dir.path() / "cache3").string();
    Client client3(cfg3);
    CHECK_THROWS_WITH(client3.chat("p"), Catch::Matchers::ContainsSubstring("malformed"));
}

TEST_CASE("batch preserves order, collects per-item errors and bounds parallelism") {
    testutil::TempDir dir("batch");
    EndpointConfig cfg;
    cfg.cache_dir = (dir.path() / "cache").string();
    cfg.max_parallel = 3;
    Client client(cfg);
    std::atomic<int> inflight{0};
    std::atomic<int> max_inflight{0};
    client.set_backend([&](const std::string& prompt, const std::string&) {
        int now = ++inflight;
        int seen = max_inflight.load();
        while (now > seen && !max_inflight.compare_exchange_weak(seen, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
        --inflight;
        if (prompt == "p3") throw Error("backend rejected p3");
        return "ok:" + prompt;
    });

    std::vector<std::string> prompts;
    for (int i = 0; i < 10; ++i) prompts.push_back("p" + std::to_string(i));
    std::vector<ChatResult> results = client.chat_batch(prompts);
    REQUIRE(results.size() == 10);
    int failures = 0;
    for (int i = 0; i < 10; ++i) {
        if (i == 3) {
            CHECK_FALSE(results[i].ok);
            CHECK(results[i].error.find("p3") != std::string::npos);
            ++failures;
        } else {
            CHECK(results[i].ok);
            CHECK(results[i].text == "ok:p" + std::to_string(i));
        }
    }
    CHECK(failures == 1);
    CHECK(max_inflight <= 3);
}

TEST_CASE("token bucket spaces requests to the configured rate") {
    testutil::TempDir dir("rate");
    EndpointConfig cfg;
    cfg.cache_dir = (dir.path() / "cache").string();
    cfg.requests_per_minute = 60;  // one per second
    cfg.max_parallel = 1;          // the fake clock is not thread-safe
    FakeClock fake;
    Client client(cfg, fake.clock());
    client.set_backend([](const std::string& p, const std::string&) { return "r:" + p; });

    std::vector<std::string> prompts;
    for (int i = 0; i < 10; ++i) prompts.push_back("p" + std::to_string(i));
    auto results = client.chat_batch(prompts);
    for (const auto& r : results) CHECK(r.ok);
    CHECK(fake.slept.count() >= 9.0);  // ten requests at 1/s leave nine seconds of waiting
}
