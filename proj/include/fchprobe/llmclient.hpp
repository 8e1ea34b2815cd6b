#pragma once

// Chat-completion HTTP client with a content-addressed response cache,
// bounded-parallelism batching, retry with exponential backoff, and a
// token-bucket rate limiter. A pluggable backend function stands in for the
// network in tests and mock runs. Cache writes are write-temp-then-rename so
// concurrent readers never observe partial files.

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fchprobe/intervals.hpp"

namespace fchprobe::llmclient {

using nlohmann::json;

struct EndpointConfig {
    std::string base_url;
    std::string api_key_env = "FCHPROBE_API_KEY";
    std::string model = "default";
    double temperature = 0.0;
    double timeout_s = 30.0;
    int max_parallel = 4;
    double requests_per_minute = 0.0;  // 0 = unlimited
    std::string cache_dir = "cache";
    int max_retries = 3;
    double backoff_base_s = 0.5;
};

// Injectable time source so rate-limit behavior is testable without waiting.
struct Clock {
    std::function<std::chrono::steady_clock::time_point()> now;
    std::function<void(std::chrono::duration<double>)> sleep;

    static Clock real() {
        return Clock{[] { return std::chrono::steady_clock::now(); },
                     [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }};
    }
};

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

inline std::string cache_key(const std::string& model, const std::string& prompt,
                             double temperature) {
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.6f", temperature);
    std::string joined = model;
    joined += '\x1f';
    joined += prompt;
    joined += '\x1f';
    joined += temp;
    return sha256_hex(joined);
}

struct ChatResult {
    bool ok = false;
    std::string text;
    std::string error;
};

class Client {
public:
    // Backend signature: (prompt, key_hint) -> raw text. The hint carries a
    // caller-provided identity (such as a case id) for keyed mock fixtures.
    using Backend = std::function<std::string(const std::string&, const std::string&)>;

    explicit Client(EndpointConfig config, Clock clock = Clock::real())
        : config_(std::move(config)), clock_(std::move(clock)) {}

    void set_backend(Backend backend) { backend_ = std::move(backend); }

    std::string chat(const std::string& prompt, const std::string& key_hint = "") {
        std::string key = cache_key(config_.model, prompt, config_.temperature);
        if (auto cached = cache_read(key)) return *cached;
        rate_limit();
        std::string text = backend_ ? backend_(prompt, key_hint) : http_chat(prompt);
        cache_write(key, text);
        return text;
    }

    std::vector<ChatResult> chat_batch(const std::vector<std::string>& prompts,
                                       const std::vector<std::string>& key_hints = {}) {
        std::vector<ChatResult> results(prompts.size());
        std::atomic<std::size_t> next{0};
        int workers = std::max(1, std::min<int>(config_.max_parallel,
                                                static_cast<int>(prompts.size())));
        auto run = [&]() {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= prompts.size()) return;
                try {
                    results[i].text = chat(prompts[i], i < key_hints.size() ? key_hints[i] : "");
                    results[i].ok = true;
                } catch (const std::exception& e) {
                    results[i].ok = false;
                    results[i].error = e.what();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run);
        for (std::thread& t : pool) t.join();
        return results;
    }

    const EndpointConfig& config() const { return config_; }

private:
    std::filesystem::path cache_path(const std::string& key) const {
        std::string model_dir;
        for (char c : config_.model)
            model_dir += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.')
                             ? c
                             : '_';
        return std::filesystem::path(config_.cache_dir) / model_dir / (key + ".json");
    }

    std::optional<std::string> cache_read(const std::string& key) const {
        std::ifstream in(cache_path(key));
        if (!in) return std::nullopt;
        try {
            json j = json::parse(in);
            return j.at("raw_text").get<std::string>();
        } catch (const json::exception&) {
            return std::nullopt;
        }
    }

    void cache_write(const std::string& key, const std::string& text) const {
        namespace fs = std::filesystem;
        fs::path path = cache_path(key);
        fs::create_directories(path.parent_path());
        json j{{"key", key},
               {"model", config_.model},
               {"temperature", config_.temperature},
               {"raw_text", text},
               {"timestamp",
                std::chrono::duration_cast<std::chrono::seconds>(
                    std::chrono::system_clock::now().time_since_epoch())
                    .count()}};
        fs::path tmp = path;
        tmp += ".tmp." + std::to_string(::getpid());
        {
            std::ofstream out(tmp);
            out << j.dump();
        }
        fs::rename(tmp, path);
    }

    void rate_limit() {
        if (config_.requests_per_minute <= 0) return;
        std::chrono::duration<double> spacing(60.0 / config_.requests_per_minute);
        std::chrono::duration<double> wait{0};
        {
            std::lock_guard lock(limiter_mutex_);
            auto now = clock_.now();
            if (!limiter_primed_) {
                limiter_primed_ = true;
                next_slot_ = now;
            }
            if (next_slot_ > now) wait = next_slot_ - now;
            auto slot = std::max(next_slot_, now);
            next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(spacing);
        }
        if (wait.count() > 0) clock_.sleep(wait);
    }

    std::string http_chat(const std::string& prompt) {
        if (config_.base_url.empty()) throw Error("no endpoint configured and no backend set");
        const char* key = std::getenv(config_.api_key_env.c_str());
        json body{{"model", config_.model},
                  {"temperature", config_.temperature},
                  {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
        std::string payload = body.dump();

        for (int attempt = 0;; ++attempt) {
            httplib::Client http(config_.base_url);
            http.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
            http.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
            httplib::Headers headers;
            if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
            auto res = http.Post("/v1/chat/completions", headers, payload, "application/json");

            std::string failure;
            if (!res) {
                failure = "connection failed";
            } else if (res->status == 401 || res->status == 403) {
                throw Error("authentication failed (HTTP " + std::to_string(res->status) + ")");
            } else if (res->status == 429 || res->status >= 500) {
                failure = "HTTP " + std::to_string(res->status);
            } else if (res->status != 200) {
                throw Error("endpoint returned HTTP " + std::to_string(res->status));
            } else {
                try {
                    json j = json::parse(res->body);
                    return j.at("choices").at(0).at("message").at("content").get<std::string>();
                } catch (const json::exception& e) {
                    throw Error(std::string("malformed chat response: ") + e.what());
                }
            }
            if (attempt >= config_.max_retries)
                throw Error("request failed after " + std::to_string(attempt + 1) +
                            " attempts: " + failure);
            clock_.sleep(std::chrono::duration<double>(config_.backoff_base_s * (1 << attempt)));
        }
    }

    EndpointConfig config_;
    Clock clock_;
    Backend backend_;
    std::mutex limiter_mutex_;
    bool limiter_primed_ = false;
    std::chrono::steady_clock::time_point next_slot_{};
};

// Keyed canned responses: mock/<key>.txt under the fixture directory, with an
// optional synthesizer for keys without a fixture file.
class MockBackend {
public:
    explicit MockBackend(std::filesystem::path fixture_dir = {},
                         std::function<std::string(const std::string&, const std::string&)>
                             synthesize = {})
        : dir_(std::move(fixture_dir)), synthesize_(std::move(synthesize)) {}

    std::string operator()(const std::string& prompt, const std::string& key_hint) const {
        if (!dir_.empty() && !key_hint.empty()) {
            std::ifstream in(dir_ / (key_hint + ".txt"));
            if (in) {
                std::string text((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
                while (!text.empty() && (text.back() == '\n' || text.back() == '\r'))
                    text.pop_back();
                return text;
            }
        }
        if (synthesize_) return synthesize_(prompt, key_hint);
        throw Error("no mock fixture for key '" + key_hint + "'");
    }

private:
    std::filesystem::path dir_;
    std::function<std::string(const std::string&, const std::string&)> synthesize_;
};

}  // namespace fchprobe::llmclient
