#pragma once

// HTTP completion providers for OpenAI-compatible and Anthropic-style APIs.
//
// Config keys, per provider name N:
//   provider.N.url          base URL, scheme and host (required)
//   provider.N.path         request path      [/v1/chat/completions | /v1/messages]
//   provider.N.model        model id sent upstream (required)
//   provider.N.style        openai | anthropic                    [openai]
//   provider.N.api_key_env  env var with the key  [THREATBENCH_<N>_API_KEY]
//   provider.N.timeout      seconds                               [120]

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "threatbench/error.hpp"
#include "threatbench/gateway.hpp"
#include "threatbench/keyvalue.hpp"

namespace threatbench {

enum class ApiStyle { openai, anthropic };

struct HttpProviderConfig {
    std::string name;
    std::string base_url;
    std::string path;
    std::string model;
    ApiStyle style = ApiStyle::openai;
    std::string api_key;
    std::chrono::seconds timeout{120};
};

inline std::string default_key_env(std::string_view name) {
    std::string out = "THREATBENCH_";
    for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : '_';
    return out + "_API_KEY";
}

inline HttpProviderConfig provider_config(const KeyValues& kv, const std::string& name) {
    const std::string p = "provider." + name + ".";
    HttpProviderConfig c;
    c.name = name;
    c.base_url = kv.get_or(p + "url", "");
    if (c.base_url.empty()) throw ConfigError(p + "url", "required");
    c.model = kv.get_or(p + "model", "");
    if (c.model.empty()) throw ConfigError(p + "model", "required");
    const auto style = text::to_lower(kv.get_or(p + "style", "openai"));
    if (style == "openai") c.style = ApiStyle::openai;
    else if (style == "anthropic") c.style = ApiStyle::anthropic;
    else throw ConfigError(p + "style", "expected openai or anthropic");
    c.path = kv.get_or(p + "path", c.style == ApiStyle::openai ? "/v1/chat/completions" : "/v1/messages");
    const auto env = kv.get_or(p + "api_key_env", default_key_env(name));
    if (const char* key = std::getenv(env.c_str())) c.api_key = key;
    const auto timeout = kv.get_int(p + "timeout", 120);
    if (timeout <= 0) throw ConfigError(p + "timeout", "must be positive");
    c.timeout = std::chrono::seconds(timeout);
    return c;
}

class HttpProvider final : public Provider {
public:
    explicit HttpProvider(HttpProviderConfig cfg) : cfg_(std::move(cfg)) {}

    std::string name() const override { return cfg_.name; }

    // Builds the upstream request body for `prompt`.
    nlohmann::json request_body(std::string_view prompt, const SamplingParams& p) const {
        nlohmann::json body{{"model", cfg_.model},
                            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
                            {"temperature", p.temperature},
                            {"max_tokens", p.max_tokens},
                            {"top_p", p.top_p}};
        // The Anthropic messages API has no frequency penalty.
        if (cfg_.style == ApiStyle::openai) body["frequency_penalty"] = p.frequency_penalty;
        return body;
    }

    std::string complete(std::string_view prompt, const SamplingParams& params) override {
        if (cfg_.api_key.empty()) throw ProviderError(ProviderErrorKind::auth, "no API key for provider '" + cfg_.name + "'");
        httplib::Client cli(cfg_.base_url);
        cli.set_connection_timeout(cfg_.timeout);
        cli.set_read_timeout(cfg_.timeout);
        cli.set_write_timeout(cfg_.timeout);
        httplib::Headers h;
        if (cfg_.style == ApiStyle::openai) {
            h.emplace("Authorization", "Bearer " + cfg_.api_key);
        } else {
            h.emplace("x-api-key", cfg_.api_key);
            h.emplace("anthropic-version", "2023-06-01");
        }
        const auto body = request_body(prompt, params).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        const auto res = cli.Post(cfg_.path, h, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const auto kind = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read
                                  ? ProviderErrorKind::timeout
                                  : ProviderErrorKind::transport;
            throw ProviderError(kind, httplib::to_string(err));
        }
        if (res->status == 401 || res->status == 403)
            throw ProviderError(ProviderErrorKind::auth, "HTTP " + std::to_string(res->status));
        if (res->status == 429) throw ProviderError(ProviderErrorKind::rate_limited, "HTTP 429");
        if (res->status == 408 || res->status == 504)
            throw ProviderError(ProviderErrorKind::timeout, "HTTP " + std::to_string(res->status));
        if (res->status >= 500) throw ProviderError(ProviderErrorKind::transport, "HTTP " + std::to_string(res->status));
        if (res->status != 200)
            throw ProviderError(ProviderErrorKind::bad_response, "HTTP " + std::to_string(res->status) + ": " + res->body);
        return extract(res->body);
    }

private:
    std::string extract(const std::string& body) const {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(ProviderErrorKind::bad_response, std::string("malformed JSON: ") + e.what());
        }
        try {
            if (cfg_.style == ApiStyle::openai) return j.at("choices").at(0).at("message").at("content").get<std::string>();
            std::string out;
            for (const auto& block : j.at("content"))
                if (block.value("type", "") == "text") out += block.at("text").get<std::string>();
            if (out.empty()) throw ProviderError(ProviderErrorKind::bad_response, "no text content");
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(ProviderErrorKind::bad_response, std::string("unexpected response shape: ") + e.what());
        }
    }

    HttpProviderConfig cfg_;
};

}  // namespace threatbench
