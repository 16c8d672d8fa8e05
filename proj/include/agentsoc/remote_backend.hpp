#pragma once

#include "agentsoc/backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

namespace agentsoc {

struct RemoteConfig {
    std::string endpoint_url;  // e.g. http://localhost:8000/v1/chat/completions
    std::string model_name;
    std::chrono::milliseconds request_timeout{120'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{1000};  // doubles per retry: 1s, 2s, 4s
    std::string api_key_env = "AGENTSOC_API_KEY";
    bool send_top_k = true;
};

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint_url lacks a scheme: " + url);
    const auto scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw ConfigError("endpoint_url scheme must be http or https: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.scheme_host_port = url;
        out.path = "/v1/chat/completions";
    } else {
        out.scheme_host_port = url.substr(0, path_start);
        out.path = url.substr(path_start);
    }
    if (out.scheme_host_port.size() <= scheme_end + 3) throw ConfigError("endpoint_url lacks a host: " + url);
    return out;
}

// Chat-completion request body for one prompt. The prompt travels unmodified as the
// single user message.
inline nlohmann::ordered_json chat_request_body(const std::string& model, std::string_view prompt,
                                                const GenerationParams& params, bool with_top_k) {
    nlohmann::ordered_json body;
    body["model"] = model;
    body["messages"] = nlohmann::ordered_json::array(
        {nlohmann::ordered_json{{"role", "user"}, {"content", std::string(prompt)}}});
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    if (with_top_k) body["top_k"] = params.top_k;
    return body;
}

inline std::string parse_chat_response(const std::string& body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty())
        throw ProtocolError("response has no choices");
    const auto& choice = doc["choices"][0];
    if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
        !choice["message"].contains("content") || !choice["message"]["content"].is_string())
        throw ProtocolError("first choice has no message.content string");
    return choice["message"]["content"].get<std::string>();
}

// OpenAI-compatible chat-completion client. Stateless per call: each generate()
// opens its own connection, so concurrent calls share nothing but the top_k flag.
class RemoteBackend final : public LlmBackend {
public:
    explicit RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.endpoint_url)) {
        if (cfg_.max_retries < 0) throw ConfigError("backend.max_retries must be >= 0");
        if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) token_ = key;
        top_k_enabled_.store(cfg_.send_top_k);
    }

    std::string generate(const CallContext&, std::string_view prompt,
                         const GenerationParams& params) const override {
        std::string last_error;
        auto delay = cfg_.backoff_base;
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(delay);
                delay *= 2;
            }
            const bool with_top_k = top_k_enabled_.load();
            const auto body = chat_request_body(cfg_.model_name, prompt, params, with_top_k).dump();

            httplib::Client client(url_.scheme_host_port);
            client.set_connection_timeout(cfg_.request_timeout);
            client.set_read_timeout(cfg_.request_timeout);
            client.set_write_timeout(cfg_.request_timeout);
            if (!token_.empty()) client.set_bearer_token_auth(token_);

            auto res = client.Post(url_.path, body, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 400 && with_top_k && res->body.find("top_k") != std::string::npos) {
                if (top_k_enabled_.exchange(false))
                    std::cerr << "agentsoc: endpoint rejected top_k; sending requests without it\n";
                --attempt;  // the rejected shape does not count against the retry budget
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                last_error = "HTTP status " + std::to_string(res->status);
                continue;
            }
            return parse_chat_response(res->body);
        }
        throw BackendUnavailable("backend " + cfg_.endpoint_url + " unavailable after " +
                                 std::to_string(cfg_.max_retries + 1) + " attempts: " + last_error);
    }

    std::string descriptor() const override {
        return "remote(url=" + cfg_.endpoint_url + ",model=" + cfg_.model_name + ")";
    }

    bool sends_top_k() const noexcept { return top_k_enabled_.load(); }

private:
    RemoteConfig cfg_;
    ParsedUrl url_;
    std::string token_;
    mutable std::atomic<bool> top_k_enabled_{true};
};

} // namespace agentsoc
