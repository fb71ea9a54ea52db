#pragma once

// Client for an external similarity service.
//
//   POST /similarity  {"text": str, "references": [str, ...]}
//                  -> {"score": float, "per_reference": [float, ...]}
//   GET  /health   -> {"model": str, "version": str}
//
// Scores are in [0, 1] and score == max(per_reference). An optional static
// token travels in the X-Embedsvc-Token header.

#include <chrono>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "threatbench/error.hpp"
#include "threatbench/textmetrics/similarity.hpp"

namespace threatbench::textmetrics {

class SimilarityServiceError : public Error {
public:
    SimilarityServiceError(const std::string& what, int status, bool retryable)
        : Error(what), status_(status), retryable_(retryable) {}

    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

struct RemoteSimilarityConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8088
    std::string token;
    std::chrono::seconds timeout{30};
    int attempts = 3;
    std::chrono::milliseconds backoff{200};
};

struct ServiceHealth {
    std::string model;
    std::string version;
};

class RemoteSimilarity final : public SimilarityProvider {
public:
    explicit RemoteSimilarity(RemoteSimilarityConfig cfg) : cfg_(std::move(cfg)) {}

    std::string name() const override { return "remote:" + cfg_.base_url; }

    ServiceHealth health() const {
        auto cli = client();
        const auto res = cli.Get("/health", headers());
        if (!res) throw SimilarityServiceError("similarity service unreachable: " + httplib::to_string(res.error()), 0, true);
        if (res->status != 200) throw SimilarityServiceError("health check failed", res->status, res->status >= 500);
        const auto j = parse(res->body);
        return {j.value("model", ""), j.value("version", "")};
    }

    std::vector<double> similarities(std::string_view s, const std::vector<std::string>& references) override {
        const nlohmann::json req{{"text", std::string(s)}, {"references", references}};
        const std::string body = req.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
        for (int attempt = 0;; ++attempt) {
            try {
                return request(body, references.size());
            } catch (const SimilarityServiceError& e) {
                if (!e.retryable() || attempt + 1 >= cfg_.attempts) throw;
                std::this_thread::sleep_for(cfg_.backoff * (1 << attempt));
            }
        }
    }

private:
    httplib::Client client() const {
        httplib::Client cli(cfg_.base_url);
        cli.set_connection_timeout(cfg_.timeout);
        cli.set_read_timeout(cfg_.timeout);
        cli.set_write_timeout(cfg_.timeout);
        return cli;
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!cfg_.token.empty()) h.emplace("X-Embedsvc-Token", cfg_.token);
        return h;
    }

    static nlohmann::json parse(const std::string& body) {
        try {
            return nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw SimilarityServiceError(std::string("malformed service response: ") + e.what(), 200, false);
        }
    }

    std::vector<double> request(const std::string& body, std::size_t n_refs) const {
        auto cli = client();
        const auto res = cli.Post("/similarity", headers(), body, "application/json");
        if (!res) throw SimilarityServiceError("similarity service unreachable: " + httplib::to_string(res.error()), 0, true);
        if (res->status == 413) throw SimilarityServiceError("input exceeds the service length cap", 413, false);
        if (res->status >= 500) throw SimilarityServiceError("similarity service error", res->status, true);
        if (res->status != 200)
            throw SimilarityServiceError("similarity request rejected: " + res->body, res->status, false);
        const auto j = parse(res->body);
        if (!j.contains("per_reference") || !j["per_reference"].is_array())
            throw SimilarityServiceError("response lacks per_reference", 200, false);
        std::vector<double> out;
        for (const auto& v : j["per_reference"]) {
            if (!v.is_number()) throw SimilarityServiceError("non-numeric similarity", 200, false);
            const double d = v.get<double>();
            if (!(d >= 0.0 && d <= 1.0)) throw SimilarityServiceError("similarity outside [0, 1]", 200, false);
            out.push_back(d);
        }
        if (out.size() != n_refs) throw SimilarityServiceError("per_reference size mismatch", 200, false);
        return out;
    }

    RemoteSimilarityConfig cfg_;
};

}  // namespace threatbench::textmetrics
