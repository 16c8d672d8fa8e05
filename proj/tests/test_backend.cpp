#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

using namespace agentsoc;
using agentsoc::testing::script_line;
using agentsoc::testing::TempDir;

namespace {

ScriptTable parse(const std::string& text) {
    std::istringstream in(text);
    return parse_script(in, "script.jsonl");
}

// Local chat-completion endpoint. `handler` decides each response.
class FakeEndpoint {
public:
    using Handler = std::function<void(const httplib::Request&, httplib::Response&, int call)>;

    explicit FakeEndpoint(Handler handler) : handler_(std::move(handler)) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = calls_++;
            {
                std::lock_guard lock(mu_);
                bodies_.push_back(req.body);
                auth_.push_back(req.get_header_value("Authorization"));
            }
            handler_(req, res, n);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeEndpoint() {
        server_.stop();
        thread_.join();
    }

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
    int calls() const { return calls_.load(); }
    std::vector<std::string> bodies() const {
        std::lock_guard lock(mu_);
        return bodies_;
    }
    std::vector<std::string> auth() const {
        std::lock_guard lock(mu_);
        return auth_;
    }

private:
    httplib::Server server_;
    Handler handler_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> calls_{0};
    mutable std::mutex mu_;
    std::vector<std::string> bodies_;
    std::vector<std::string> auth_;
};

std::string completion(const std::string& content) {
    return nlohmann::json{{"id", "x"},
                          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}}
        .dump();
}

RemoteConfig fast_config(const std::string& url, int retries = 3) {
    RemoteConfig c;
    c.endpoint_url = url;
    c.model_name = "test-model";
    c.max_retries = retries;
    c.backoff_base = std::chrono::milliseconds(1);
    c.request_timeout = std::chrono::milliseconds(2000);
    return c;
}

} // namespace

TEST(Script, EmptyFileIsEmptyTable) {
    TempDir dir;
    std::ofstream(dir / "empty.jsonl").close();
    EXPECT_TRUE(load_script((dir / "empty.jsonl").string()).empty());
}

TEST(Script, DuplicateKeyIsRejectedWithLine) {
    const auto text = script_line("agent0", 1, "move", "x+1") + "\n" + script_line("agent1", 1, "move", "y+1") +
                      "\n" + script_line("agent0", 1, "move", "stay") + "\n";
    try {
        parse(text);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("script.jsonl:3"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
    }
}

TEST(Script, MalformedRecordsNameTheLine) {
    EXPECT_THROW(parse("{not json}\n"), ConfigError);
    EXPECT_THROW(parse(R"({"agent":"a","step":1,"phase":"dance","text":"x"})"), ConfigError);
    EXPECT_THROW(parse(R"({"agent":"a","step":1,"phase":"move"})"), ConfigError);
    EXPECT_THROW(parse(R"({"agent":"a","step":"1","phase":"move","text":"x"})"), ConfigError);
    try {
        parse("\n\n[1,2]\n");
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
    }
}

TEST(Script, MissingFileIsConfigError) { EXPECT_THROW(load_script("/nonexistent/script.jsonl"), ConfigError); }

TEST(ScriptedBackend, ReturnsScriptedTextForKey) {
    ScriptedBackend b(parse(script_line("agent3", 7, "move", "x+1") + "\n" +
                            script_line("agent0", 1, "message", "hello there")));
    EXPECT_EQ(b.generate({"agent3", 7, Phase::Move}, "whatever", {}), "x+1");
    EXPECT_EQ(b.generate({"agent0", 1, Phase::Message}, "p", {}), "hello there");
}

TEST(ScriptedBackend, FallbackIsDeterministicAndSeedDependent) {
    ScriptedBackend a({}, 1), a2({}, 1), b({}, 2);
    int differs = 0;
    for (int i = 0; i < 50; ++i) {
        const std::string prompt = "prompt number " + std::to_string(i);
        const CallContext ctx{"agent0", i, Phase::Message};
        EXPECT_EQ(a.generate(ctx, prompt, {}), a2.generate(ctx, prompt, {}));
        differs += a.generate(ctx, prompt, {}) != b.generate(ctx, prompt, {});
    }
    EXPECT_GT(differs, 0);
}

TEST(ScriptedBackend, FallbackMoveAlwaysParses) {
    ScriptedBackend b({}, 5);
    for (int i = 0; i < 200; ++i) {
        const auto text = b.generate({"agent1", i, Phase::Move}, "p" + std::to_string(i), {});
        EXPECT_TRUE(parse_move(text).ok) << text;
    }
}

TEST(ScriptedBackend, ConcurrentCallsMatchSequential) {
    ScriptedBackend b({}, 9);
    std::vector<std::string> seq(64), par(64);
    for (std::size_t i = 0; i < 64; ++i) seq[i] = b.generate({"a", 1, Phase::Memory}, "p" + std::to_string(i), {});
    parallel_for(64, 8, [&](std::size_t i) { par[i] = b.generate({"a", 1, Phase::Memory}, "p" + std::to_string(i), {}); });
    EXPECT_EQ(seq, par);
}

TEST(GenerationParams, DefaultsAndValidation) {
    GenerationParams p;
    EXPECT_DOUBLE_EQ(p.temperature, 0.7);
    EXPECT_EQ(p.max_tokens, 256);
    EXPECT_DOUBLE_EQ(p.top_p, 0.95);
    EXPECT_EQ(p.top_k, 40);
    EXPECT_NO_THROW(p.validate());
    p.top_p = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.top_k = 0;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.temperature = -0.1;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.max_tokens = 0;
    EXPECT_THROW(p.validate(), ConfigError);
}

TEST(RemoteBackend, RequestCarriesAllParamsAndExactPrompt) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content(completion("I will move x+1"), "application/json");
    });
    RemoteBackend b(fast_config(ep.url()));
    const std::string prompt = "line one\n  \"quoted\" [No Messages]\t\xc3\xa9";
    EXPECT_EQ(b.generate({}, prompt, GenerationParams{}), "I will move x+1");

    ASSERT_EQ(ep.bodies().size(), 1u);
    const auto body = nlohmann::json::parse(ep.bodies()[0]);
    EXPECT_EQ(body["model"], "test-model");
    ASSERT_EQ(body["messages"].size(), 1u);
    EXPECT_EQ(body["messages"][0]["role"], "user");
    EXPECT_EQ(body["messages"][0]["content"].get<std::string>(), prompt);
    EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.7);
    EXPECT_EQ(body["max_tokens"].get<int>(), 256);
    EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 0.95);
    EXPECT_EQ(body["top_k"].get<int>(), 40);
}

TEST(RemoteBackend, BearerTokenFromEnvironment) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int) {
        res.set_content(completion("ok"), "application/json");
    });
    ::setenv("AGENTSOC_TEST_TOKEN", "s3cret", 1);
    auto cfg = fast_config(ep.url());
    cfg.api_key_env = "AGENTSOC_TEST_TOKEN";
    RemoteBackend b(cfg);
    b.generate({}, "hi", {});
    ::unsetenv("AGENTSOC_TEST_TOKEN");
    ASSERT_EQ(ep.auth().size(), 1u);
    EXPECT_EQ(ep.auth()[0], "Bearer s3cret");
}

TEST(RemoteBackend, RetriesTransientFailuresThenSucceedsOnce) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int call) {
        if (call < 2) {
            res.status = 503;
            res.set_content("busy", "text/plain");
        } else {
            res.set_content(completion("third time"), "application/json");
        }
    });
    RemoteBackend b(fast_config(ep.url()));
    EXPECT_EQ(b.generate({}, "hi", {}), "third time");
    EXPECT_EQ(ep.calls(), 3);
}

TEST(RemoteBackend, ExhaustedRetriesRaiseBackendUnavailable) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int) {
        res.status = 500;
        res.set_content("down", "text/plain");
    });
    RemoteBackend b(fast_config(ep.url(), 2));
    try {
        b.generate({}, "hi", {});
        FAIL() << "expected BackendUnavailable";
    } catch (const BackendUnavailable& e) {
        EXPECT_NE(std::string(e.what()).find("500"), std::string::npos) << e.what();
    }
    EXPECT_EQ(ep.calls(), 3);
}

TEST(RemoteBackend, BackoffDoublesBetweenAttempts) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int) { res.status = 502; });
    auto cfg = fast_config(ep.url(), 3);
    cfg.backoff_base = std::chrono::milliseconds(20);
    RemoteBackend b(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    EXPECT_THROW(b.generate({}, "hi", {}), BackendUnavailable);
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_GE(elapsed, std::chrono::milliseconds(20 + 40 + 80));
}

TEST(RemoteBackend, UnreachableEndpointIsBackendUnavailable) {
    // Port 1 on localhost refuses connections.
    RemoteBackend b(fast_config("http://127.0.0.1:1/v1/chat/completions", 1));
    EXPECT_THROW(b.generate({}, "hi", {}), BackendUnavailable);
}

TEST(RemoteBackend, MalformedBodyIsProtocolError) {
    FakeEndpoint ep([](const httplib::Request&, httplib::Response& res, int call) {
        res.set_content(call == 0 ? "not json" : R"({"choices":[]})", "application/json");
    });
    RemoteBackend b(fast_config(ep.url()));
    EXPECT_THROW(b.generate({}, "hi", {}), ProtocolError);
    EXPECT_THROW(b.generate({}, "hi", {}), ProtocolError);
    EXPECT_EQ(ep.calls(), 2);
}

TEST(RemoteBackend, DropsTopKWhenEndpointRejectsIt) {
    FakeEndpoint ep([](const httplib::Request& req, httplib::Response& res, int) {
        if (nlohmann::json::parse(req.body).contains("top_k")) {
            res.status = 400;
            res.set_content(R"({"error":"unknown field top_k"})", "application/json");
        } else {
            res.set_content(completion("fine"), "application/json");
        }
    });
    RemoteBackend b(fast_config(ep.url(), 0));
    EXPECT_EQ(b.generate({}, "hi", {}), "fine");
    EXPECT_FALSE(b.sends_top_k());
    EXPECT_EQ(b.generate({}, "again", {}), "fine");
    EXPECT_EQ(ep.calls(), 3);
}

TEST(RemoteBackend, ConcurrentCallsEachGetOneCompletion) {
    FakeEndpoint ep([](const httplib::Request& req, httplib::Response& res, int) {
        const auto body = nlohmann::json::parse(req.body);
        res.set_content(completion("echo:" + body["messages"][0]["content"].get<std::string>()), "application/json");
    });
    RemoteBackend b(fast_config(ep.url()));
    std::vector<std::string> out(16);
    parallel_for(16, 4, [&](std::size_t i) { out[i] = b.generate({}, "p" + std::to_string(i), {}); });
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(out[i], "echo:p" + std::to_string(i));
    EXPECT_EQ(ep.calls(), 16);
}

TEST(RemoteBackend, UrlValidation) {
    EXPECT_THROW(RemoteBackend(fast_config("localhost:8000")), ConfigError);
    EXPECT_THROW(RemoteBackend(fast_config("ftp://host/x")), ConfigError);
    const auto u = split_url("http://h:8080");
    EXPECT_EQ(u.scheme_host_port, "http://h:8080");
    EXPECT_EQ(u.path, "/v1/chat/completions");
}
