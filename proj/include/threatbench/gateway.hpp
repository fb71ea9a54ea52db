#pragma once

// Response collection and ingestion: sampling parameters, the canonical
// record store, provider-agnostic collection with retries and rate limiting,
// quality control and dataset import.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatbench/corpus.hpp"
#include "threatbench/error.hpp"
#include "threatbench/keyvalue.hpp"
#include "threatbench/text.hpp"

namespace threatbench {

// ---------------------------------------------------------------------------
// Sampling parameters
// ---------------------------------------------------------------------------

struct SamplingParams {
    double temperature = 0.7;
    int max_tokens = 4096;
    double top_p = 0.9;
    double frequency_penalty = 0.0;

    friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

inline void validate(const SamplingParams& p) {
    if (!std::isfinite(p.temperature) || p.temperature < 0.0)
        throw ParameterError("temperature must be finite and >= 0");
    if (p.max_tokens <= 0) throw ParameterError("max_tokens must be positive");
    if (!(p.top_p > 0.0 && p.top_p <= 1.0)) throw ParameterError("top_p must lie in (0, 1]");
    if (!std::isfinite(p.frequency_penalty)) throw ParameterError("frequency_penalty must be finite");
}

inline SamplingParams params_from(const KeyValues& kv) {
    SamplingParams p;
    p.temperature = kv.get_double("temperature", p.temperature);
    p.max_tokens = static_cast<int>(kv.get_int("max_tokens", p.max_tokens));
    p.top_p = kv.get_double("top_p", p.top_p);
    p.frequency_penalty = kv.get_double("frequency_penalty", p.frequency_penalty);
    validate(p);
    return p;
}

// ---------------------------------------------------------------------------
// Timestamps (UTC, second resolution)
// ---------------------------------------------------------------------------

using Timestamp = std::chrono::sys_seconds;

inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const hh_mm_ss hms{ts - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" and ISO 8601 with 'T', optional
// fractional seconds (truncated) and a 'Z' or numeric UTC offset.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
    using namespace std::chrono;
    const std::string str(text::trim(s));
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0, consumed = 0;
    if (std::sscanf(str.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) != 3) return std::nullopt;
    std::size_t pos = static_cast<std::size_t>(consumed);
    if (pos < str.size() && (str[pos] == 'T' || str[pos] == ' ')) {
        int c2 = 0;
        if (std::sscanf(str.c_str() + pos + 1, "%2d:%2d:%2d%n", &h, &mi, &sec, &c2) != 3) return std::nullopt;
        pos += 1 + static_cast<std::size_t>(c2);
        if (pos < str.size() && str[pos] == '.') {
            ++pos;
            while (pos < str.size() && str[pos] >= '0' && str[pos] <= '9') ++pos;
        }
    }
    int offset_minutes = 0;
    if (pos < str.size()) {
        if (str[pos] == 'Z' && pos + 1 == str.size()) {
            pos = str.size();
        } else if (str[pos] == '+' || str[pos] == '-') {
            int oh = 0, om = 0;
            if (std::sscanf(str.c_str() + pos + 1, "%2d:%2d", &oh, &om) != 2) return std::nullopt;
            offset_minutes = (str[pos] == '-' ? -1 : 1) * (oh * 60 + om);
        } else {
            return std::nullopt;
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 60) return std::nullopt;
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

enum class RecordSource { live, imported };

inline std::string_view to_string(RecordSource s) { return s == RecordSource::live ? "live" : "imported"; }

struct ResponseRecord {
    std::string id;
    ExperimentCondition condition;
    std::string prompt;
    std::string response;
    SamplingParams params;
    Timestamp timestamp;
    RecordSource source = RecordSource::live;

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

inline nlohmann::ordered_json to_json(const ResponseRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["model"] = r.condition.model.name();
    j["domain"] = std::string(domain_info(r.condition.domain).key);
    j["threat"] = std::string(to_string(r.condition.threat));
    j["prompt"] = r.prompt;
    j["response"] = r.response;
    j["temperature"] = r.params.temperature;
    j["max_tokens"] = r.params.max_tokens;
    j["top_p"] = r.params.top_p;
    j["frequency_penalty"] = r.params.frequency_penalty;
    j["timestamp"] = format_timestamp(r.timestamp);
    j["source"] = std::string(to_string(r.source));
    return j;
}

inline std::string to_line(const ResponseRecord& r) {
    return to_json(r).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

// Canonical field names of the record file, in file order.
inline const std::vector<std::string>& canonical_fields() {
    static const std::vector<std::string> fields{
        "id", "model", "domain", "threat", "prompt", "response", "temperature",
        "max_tokens", "top_p", "frequency_penalty", "timestamp", "source"};
    return fields;
}

inline const std::vector<std::string>& required_fields() {
    static const std::vector<std::string> fields{"model", "domain", "threat", "response"};
    return fields;
}

namespace detail {

// One row of an input file, keyed by canonical field name, values as text.
using Row = std::map<std::string, std::string>;

inline double row_double(const Row& row, const std::string& field, double fallback, std::size_t line) {
    const auto it = row.find(field);
    if (it == row.end() || text::trim(it->second).empty()) return fallback;
    const std::string v(text::trim(it->second));
    char* end = nullptr;
    const double d = std::strtod(v.c_str(), &end);
    if (*end != '\0') throw ParseError("field '" + field + "' is not a number: '" + v + "'", line);
    return d;
}

inline ResponseRecord record_from_row(const Row& row, std::size_t line, RecordSource default_source) {
    for (const auto& f : required_fields()) {
        const auto it = row.find(f);
        if (it == row.end() || text::trim(it->second).empty()) throw SchemaError(f, line);
    }
    const auto dom = parse_domain(row.at("domain"));
    if (!dom) throw ParseError("unknown domain '" + row.at("domain") + "'", line);
    const auto threat = parse_threat(row.at("threat"));
    if (!threat) throw ParseError("unknown threat '" + row.at("threat") + "'", line);

    SamplingParams params;
    params.temperature = row_double(row, "temperature", params.temperature, line);
    params.max_tokens = static_cast<int>(row_double(row, "max_tokens", params.max_tokens, line));
    params.top_p = row_double(row, "top_p", params.top_p, line);
    params.frequency_penalty = row_double(row, "frequency_penalty", params.frequency_penalty, line);

    Timestamp ts{};
    if (const auto it = row.find("timestamp"); it != row.end() && !text::trim(it->second).empty()) {
        const auto parsed = parse_timestamp(it->second);
        if (!parsed) throw ParseError("unparseable timestamp '" + it->second + "'", line);
        ts = *parsed;
    }

    RecordSource source = default_source;
    if (const auto it = row.find("source"); it != row.end() && !it->second.empty()) {
        if (it->second == "live") source = RecordSource::live;
        else if (it->second == "imported") source = RecordSource::imported;
        else throw ParseError("unknown source '" + it->second + "'", line);
    }

    std::string id;
    if (const auto it = row.find("id"); it != row.end()) id = std::string(text::trim(it->second));
    if (id.empty()) id = "row-" + std::to_string(line);

    const auto get = [&](const char* f) {
        const auto it = row.find(f);
        return it == row.end() ? std::string() : it->second;
    };
    return ResponseRecord{id,
                          ExperimentCondition{parse_model(row.at("model")), *dom, *threat},
                          get("prompt"),
                          row.at("response"),
                          params,
                          ts,
                          source};
}

inline std::string json_scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return {};
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
        return buf;
    }
    return v.dump();
}

}  // namespace detail

inline ResponseRecord parse_record_line(std::string_view line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw ParseError("record is not an object", line_no);
    detail::Row row;
    for (const auto& f : canonical_fields())
        if (j.contains(f)) row[f] = detail::json_scalar_text(j[f]);
    return detail::record_from_row(row, line_no, RecordSource::live);
}

struct LoadedRecords {
    std::vector<ResponseRecord> records;
    std::size_t corrupt_lines = 0;
};

// Reads a canonical record file; unparseable lines are skipped and counted.
inline LoadedRecords load_records(const std::filesystem::path& path) {
    LoadedRecords out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::string line;
    std::size_t line_no = 0;
    std::unordered_set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            auto r = parse_record_line(line, line_no);
            if (!ids.insert(r.id).second) {
                ++out.corrupt_lines;
                continue;
            }
            out.records.push_back(std::move(r));
        } catch (const ParseError&) {
            ++out.corrupt_lines;
        }
    }
    return out;
}

inline void export_records(const std::filesystem::path& path, const std::vector<ResponseRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& r : records) out << to_line(r) << '\n';
}

// Append-only line-delimited store. Appends are serialized; load() returns a
// snapshot taken under the same lock.
class RecordStore {
public:
    explicit RecordStore(std::filesystem::path path) : path_(std::move(path)) {
        for (const auto& r : load_records(path_).records) ids_.insert(r.id);
    }

    const std::filesystem::path& path() const noexcept { return path_; }

    void append(const ResponseRecord& r) {
        const std::string line = to_line(r);
        std::lock_guard lock(mutex_);
        if (ids_.count(r.id)) throw DomainError("duplicate record id '" + r.id + "'");
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw Error("cannot append to '" + path_.string() + "'");
        out << line << '\n';
        out.flush();
        if (!out) throw Error("write to '" + path_.string() + "' failed");
        ids_.insert(r.id);
    }

    bool contains(const std::string& id) const {
        std::lock_guard lock(mutex_);
        return ids_.count(id) != 0;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return ids_.size();
    }

    LoadedRecords load() const {
        std::lock_guard lock(mutex_);
        return load_records(path_);
    }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::set<std::string> ids_;
};

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

enum class ProviderErrorKind { auth, rate_limited, timeout, transport, bad_response };

inline std::string_view to_string(ProviderErrorKind k) {
    switch (k) {
        case ProviderErrorKind::auth: return "auth";
        case ProviderErrorKind::rate_limited: return "rate_limited";
        case ProviderErrorKind::timeout: return "timeout";
        case ProviderErrorKind::transport: return "transport";
        case ProviderErrorKind::bad_response: return "bad_response";
    }
    return "?";
}

class ProviderError : public Error {
public:
    ProviderError(ProviderErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ProviderErrorKind kind() const noexcept { return kind_; }

    // Worth retrying with backoff.
    bool transient() const noexcept {
        return kind_ == ProviderErrorKind::rate_limited || kind_ == ProviderErrorKind::timeout ||
               kind_ == ProviderErrorKind::transport;
    }

private:
    ProviderErrorKind kind_;
};

// A text-completion backend. Implementations must tolerate concurrent calls.
class Provider {
public:
    virtual ~Provider() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(std::string_view prompt, const SamplingParams& params) = 0;
};

// Spaces request start times at least 1/rate apart, allowing `burst` requests
// to start back to back after an idle period. A rate <= 0 disables limiting.
class RateLimiter {
public:
    using Clock = std::chrono::steady_clock;

    explicit RateLimiter(double per_second = 0.0, std::size_t burst = 1) : burst_(std::max<std::size_t>(burst, 1)) {
        if (per_second > 0.0)
            interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / per_second));
    }

    void acquire() {
        if (interval_ == Clock::duration::zero()) return;
        const auto now = Clock::now();
        Clock::time_point slot;
        {
            std::lock_guard lock(mutex_);
            const auto earliest = now - interval_ * static_cast<long>(burst_ - 1);
            if (next_ < earliest) next_ = earliest;
            slot = next_;
            next_ += interval_;
        }
        if (slot > now) std::this_thread::sleep_until(slot);
    }

private:
    Clock::duration interval_ = Clock::duration::zero();
    std::size_t burst_;
    std::mutex mutex_;
    Clock::time_point next_{};
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds base_delay{500};
    std::chrono::milliseconds max_delay{8000};
    double jitter = 0.25;  // fraction of the delay, applied symmetrically

    std::chrono::milliseconds delay(int attempt, std::mt19937_64& rng) const {
        const double raw = std::min<double>(static_cast<double>(max_delay.count()),
                                            static_cast<double>(base_delay.count()) * std::pow(2.0, attempt));
        std::uniform_real_distribution<double> u(-jitter, jitter);
        return std::chrono::milliseconds(static_cast<long long>(std::max(0.0, raw * (1.0 + u(rng)))));
    }
};

struct CollectJob {
    ComposedPrompt prompt;
    ModelId model;
    SamplingParams params;
};

struct CollectOutcome {
    std::optional<ResponseRecord> record;
    std::string error;  // empty on success
};

// Issues prompts to one provider and persists each successful response.
class Collector {
public:
    using Clock = std::function<Timestamp()>;

    Collector(Provider& provider, RecordStore& store, RateLimiter& limiter, RetryPolicy retry = {},
              std::uint64_t seed = 0)
        : provider_(provider), store_(store), limiter_(limiter), retry_(retry), rng_(seed) {}

    void set_clock(Clock clock) { clock_ = std::move(clock); }

    ResponseRecord collect(const ComposedPrompt& prompt, const ModelId& model, const SamplingParams& params) {
        validate(params);
        const auto condition = prompt.condition_for(model);
        std::string response;
        for (int attempt = 0;; ++attempt) {
            limiter_.acquire();
            try {
                response = provider_.complete(prompt.text, params);
                break;
            } catch (const ProviderError& e) {
                if (!e.transient()) throw;
                if (attempt + 1 >= retry_.attempts) {
                    if (e.kind() == ProviderErrorKind::rate_limited)
                        throw ProviderError(ProviderErrorKind::rate_limited,
                                            "rate limit exhausted after " + std::to_string(retry_.attempts) +
                                                " attempts");
                    throw;
                }
                std::this_thread::sleep_for(backoff(attempt));
            }
        }
        ResponseRecord rec{next_id(condition), condition, prompt.text, std::move(response), params,
                           clock_ ? clock_() : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()),
                           RecordSource::live};
        store_.append(rec);
        return rec;
    }

    // Runs jobs on `concurrency` worker threads; outcomes keep job order.
    std::vector<CollectOutcome> collect_all(const std::vector<CollectJob>& jobs, std::size_t concurrency) {
        std::vector<CollectOutcome> out(jobs.size());
        std::atomic<std::size_t> next{0};
        const auto worker = [&] {
            for (std::size_t i = next++; i < jobs.size(); i = next++) {
                try {
                    out[i].record = collect(jobs[i].prompt, jobs[i].model, jobs[i].params);
                } catch (const std::exception& e) {
                    out[i].error = e.what();
                }
            }
        };
        {
            std::vector<std::jthread> pool;
            for (std::size_t t = 0; t < std::max<std::size_t>(1, concurrency); ++t) pool.emplace_back(worker);
        }
        return out;
    }

private:
    std::chrono::milliseconds backoff(int attempt) {
        std::lock_guard lock(mutex_);
        return retry_.delay(attempt, rng_);
    }

    std::string next_id(const ExperimentCondition& c) {
        std::lock_guard lock(mutex_);
        for (;;) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
            std::string id = "live-" + text::to_lower(detail::alnum_lower(c.model.name())) + "-" +
                             std::string(domain_info(c.domain).key) + "-" + std::string(to_string(c.threat)) +
                             "-" + buf;
            if (!store_.contains(id)) return id;
        }
    }

    Provider& provider_;
    RecordStore& store_;
    RateLimiter& limiter_;
    RetryPolicy retry_;
    std::mutex mutex_;
    std::mt19937_64 rng_;
    Clock clock_;
};

// ---------------------------------------------------------------------------
// Quality control
// ---------------------------------------------------------------------------

enum class InvalidReason { too_short, content_flag };

inline std::string_view to_string(InvalidReason r) {
    return r == InvalidReason::too_short ? "too_short" : "content_flag";
}

struct Validity {
    bool valid = true;
    std::optional<InvalidReason> reason;
    std::string detail;
};

struct QcOptions {
    std::size_t min_chars = 50;          // responses must be strictly longer
    std::vector<std::string> blocklist;  // case-insensitive substrings
};

inline std::vector<std::string> load_blocklist(const std::string& path) {
    std::vector<std::string> out;
    for (const auto& raw : text::split(text::read_file(path), '\n')) {
        const auto line = text::trim(raw);
        if (!line.empty() && line.front() != '#') out.push_back(text::to_lower(line));
    }
    return out;
}

inline Validity validate_response(const ResponseRecord& r, const QcOptions& opts = {}) {
    const auto n = text::code_point_count(r.response);
    if (n <= opts.min_chars)
        return {false, InvalidReason::too_short, std::to_string(n) + " characters"};
    const std::string lowered = text::to_lower(r.response);
    for (const auto& marker : opts.blocklist) {
        if (!marker.empty() && lowered.find(text::to_lower(marker)) != std::string::npos)
            return {false, InvalidReason::content_flag, marker};
    }
    return {};
}

inline std::string normalize_for_dedupe(std::string_view s) { return text::collapse_whitespace(s); }

struct DedupeResult {
    std::vector<ResponseRecord> kept;
    std::size_t removed = 0;
};

// Drops later records whose normalized response text repeats an earlier one.
inline DedupeResult dedupe(std::vector<ResponseRecord> records) {
    DedupeResult out;
    std::unordered_set<std::string> seen;
    for (auto& r : records) {
        if (seen.insert(normalize_for_dedupe(r.response)).second) out.kept.push_back(std::move(r));
        else ++out.removed;
    }
    return out;
}

namespace detail {

// Unbiased draw in [0, bound) from a 64-bit engine; portable across standard libraries.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x < limit) return x % bound;
    }
}

}  // namespace detail

// Seeded 10% sample for manual review, returned in input order.
inline std::vector<std::string> spot_sample(const std::vector<ResponseRecord>& records, std::uint64_t seed) {
    if (records.empty()) throw DomainError("spot_sample: no records");
    const std::size_t k = records.size() / 10;
    std::vector<std::size_t> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + detail::bounded(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> chosen(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(chosen.begin(), chosen.end());
    std::vector<std::string> out;
    for (auto i : chosen) out.push_back(records[i].id);
    return out;
}

struct QualityReport {
    std::size_t total = 0;
    std::size_t invalid_short = 0;
    std::size_t flagged_content = 0;
    std::size_t duplicates_removed = 0;
    std::size_t valid = 0;
    std::vector<std::string> sample_ids;
    std::vector<std::string> flagged_ids;
};

inline nlohmann::ordered_json to_json(const QualityReport& q) {
    nlohmann::ordered_json j;
    j["total"] = q.total;
    j["invalid_short"] = q.invalid_short;
    j["flagged_content"] = q.flagged_content;
    j["duplicates_removed"] = q.duplicates_removed;
    j["valid"] = q.valid;
    j["sample_ids"] = q.sample_ids;
    j["flagged_ids"] = q.flagged_ids;
    return j;
}

struct QcResult {
    std::vector<ResponseRecord> records;
    QualityReport report;
};

// Validity check, then duplicate removal, then the review sample. Too-short
// responses are removed; content-flagged responses are kept and listed.
inline QcResult run_qc(std::vector<ResponseRecord> records, const QcOptions& opts, std::uint64_t seed) {
    QcResult out;
    out.report.total = records.size();
    std::vector<ResponseRecord> valid;
    for (auto& r : records) {
        const auto v = validate_response(r, opts);
        if (!v.valid && v.reason == InvalidReason::too_short) {
            ++out.report.invalid_short;
            continue;
        }
        if (!v.valid) {
            ++out.report.flagged_content;
            out.report.flagged_ids.push_back(r.id);
        }
        valid.push_back(std::move(r));
    }
    auto d = dedupe(std::move(valid));
    out.report.duplicates_removed = d.removed;
    out.records = std::move(d.kept);
    out.report.valid = out.records.size();
    if (!out.records.empty()) out.report.sample_ids = spot_sample(out.records, seed);
    return out;
}

// ---------------------------------------------------------------------------
// Dataset import
// ---------------------------------------------------------------------------

// Maps canonical field names onto the column names of an external file.
class FieldMapping {
public:
    FieldMapping() = default;

    static FieldMapping from(const KeyValues& kv) {
        FieldMapping m;
        for (const auto& [canonical, source] : kv.entries()) {
            if (std::find(canonical_fields().begin(), canonical_fields().end(), canonical) ==
                canonical_fields().end())
                throw ConfigError(canonical, "not a canonical record field");
            m.source_[canonical] = source;
        }
        return m;
    }

    static FieldMapping load(const std::string& path) { return from(KeyValues::load(path)); }

    std::string source_for(const std::string& canonical) const {
        const auto it = source_.find(canonical);
        return it == source_.end() ? canonical : it->second;
    }

private:
    std::map<std::string, std::string> source_;
};

namespace detail {

struct CsvRow {
    std::vector<std::string> fields;
    std::size_t line = 0;  // line on which the row starts
};

// RFC 4180: quoted fields may contain separators, doubled quotes and newlines.
inline std::vector<CsvRow> parse_delimited(std::string_view s, char sep) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    std::size_t line = 1;
    row.line = 1;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < s.size() && s[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
            any = true;
        } else if (c == sep) {
            row.fields.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.fields.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row = CsvRow{};
            any = false;
            ++line;
            row.line = line;
        } else {
            field.push_back(c);
            any = true;
        }
    }
    if (quoted) throw ParseError("unterminated quoted field", row.line);
    if (any || !field.empty()) {
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<ResponseRecord> read_delimited(std::string_view content, char sep, const FieldMapping& mapping) {
    const auto rows = parse_delimited(content, sep);
    std::vector<ResponseRecord> out;
    if (rows.empty()) return out;
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < rows[0].fields.size(); ++i) column[std::string(text::trim(rows[0].fields[i]))] = i;
    for (const auto& f : required_fields())
        if (!column.count(mapping.source_for(f))) throw SchemaError(f, rows[0].line);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r].fields;
        if (cells.size() != rows[0].fields.size())
            throw ParseError("expected " + std::to_string(rows[0].fields.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             rows[r].line);
        Row row;
        for (const auto& f : canonical_fields()) {
            const auto it = column.find(mapping.source_for(f));
            if (it != column.end()) row[f] = cells[it->second];
        }
        out.push_back(record_from_row(row, rows[r].line, RecordSource::imported));
    }
    return out;
}

inline Row json_row(const nlohmann::json& j, const FieldMapping& mapping, std::size_t line) {
    if (!j.is_object()) throw ParseError("record is not an object", line);
    Row row;
    for (const auto& f : canonical_fields()) {
        const auto key = mapping.source_for(f);
        if (j.contains(key)) row[f] = json_scalar_text(j[key]);
    }
    return row;
}

}  // namespace detail

// Parses an external dataset into records with source=imported, without QC.
// Format follows the extension: .csv, .tsv, otherwise JSON lines or a JSON array.
inline std::vector<ResponseRecord> read_dataset(const std::filesystem::path& path, const FieldMapping& mapping = {}) {
    const std::string content = text::read_file(path.string());
    const auto ext = text::to_lower(path.extension().string());
    std::vector<ResponseRecord> out;
    if (ext == ".csv") out = detail::read_delimited(content, ',', mapping);
    else if (ext == ".tsv") out = detail::read_delimited(content, '\t', mapping);
    else if (!text::trim(content).empty() && text::trim(content).front() == '[') {
        nlohmann::json arr;
        try {
            arr = nlohmann::json::parse(content);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("malformed JSON array: ") + e.what(), 0);
        }
        for (std::size_t i = 0; i < arr.size(); ++i)
            out.push_back(detail::record_from_row(detail::json_row(arr[i], mapping, i + 1), i + 1,
                                                  RecordSource::imported));
    } else {
        std::size_t line_no = 0;
        for (const auto& line : text::split(content, '\n')) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(std::string("malformed row: ") + e.what(), line_no);
            }
            out.push_back(detail::record_from_row(detail::json_row(j, mapping, line_no), line_no,
                                                  RecordSource::imported));
        }
    }
    std::unordered_set<std::string> ids;
    for (auto& r : out) {
        r.source = RecordSource::imported;
        if (!ids.insert(r.id).second) throw ParseError("duplicate record id '" + r.id + "'", 0);
    }
    return out;
}

struct ImportResult {
    std::vector<ResponseRecord> records;  // after QC
    QualityReport report;                 // report.total counts rows before QC
};

inline ImportResult import_dataset(const std::filesystem::path& path, const FieldMapping& mapping = {},
                                   const QcOptions& qc = {}, std::uint64_t seed = 0) {
    auto qcr = run_qc(read_dataset(path, mapping), qc, seed);
    return {std::move(qcr.records), std::move(qcr.report)};
}

}  // namespace threatbench
