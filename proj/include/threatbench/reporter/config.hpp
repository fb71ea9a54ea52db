#pragma once

// Pipeline configuration: a flat `key = value` file.
//
//   data.path               dataset or record store (required)
//   data.kind               import | store                      [import]
//   data.mapping            field mapping file for imports
//   lexicon.analytical      term list (required; likewise certainty,
//   lexicon.certainty         defensive, formal)
//   lexicon.defensive
//   lexicon.formal
//   references.path         domain reference passages (required)
//   similarity.provider     lexical | remote                    [lexical]
//   similarity.url          service base URL (remote only)
//   similarity.token_env    env var holding the service token
//   appropriateness.aggregate  max | mean                       [max]
//   qc.min_chars            responses must be longer             [50]
//   qc.blocklist            content-flag marker file
//   threshold.alpha         on p_fdr                             [0.05]
//   threshold.min_es        on |effect size %|                   [20]
//   threshold.trend         dagger mark below this p_fdr         [0.075]
//   profile.denominator     cell | condition                     [cell]
//   polarity.<metric>       up | down | context
//   seed                    QC review-sample seed                [0]
//   threads                 scoring workers, 0 = all cores       [0]
//
// Relative paths resolve against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "threatbench/error.hpp"
#include "threatbench/gateway.hpp"
#include "threatbench/keyvalue.hpp"
#include "threatbench/reporter/tables.hpp"
#include "threatbench/textmetrics/similarity.hpp"
#include "threatbench/verdict.hpp"

namespace threatbench::reporter {

enum class DataKind { import, store };

struct PipelineConfig {
    KeyValues raw;  // as read; hashed into the manifest
    std::filesystem::path data_path;
    DataKind data_kind = DataKind::import;
    std::optional<std::filesystem::path> mapping_path;
    std::filesystem::path lexicon_analytical, lexicon_certainty, lexicon_defensive, lexicon_formal;
    std::filesystem::path references_path;
    bool remote_similarity = false;
    std::string similarity_url;
    std::string similarity_token_env;
    textmetrics::Aggregation aggregation = textmetrics::Aggregation::max;
    std::size_t min_chars = 50;
    std::optional<std::filesystem::path> blocklist_path;
    verdict::Thresholds thresholds;
    double trend = 0.075;
    Denominator denominator = Denominator::cell;
    verdict::PolarityTable polarity;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
    std::filesystem::path p(value);
    return p.is_absolute() ? p : base / p;
}

inline std::filesystem::path existing_path(const KeyValues& kv, const std::filesystem::path& base,
                                           const std::string& key) {
    const auto v = kv.get(key);
    if (!v || text::trim(*v).empty()) throw ConfigError(key, "required path is missing");
    auto p = resolve(base, std::string(text::trim(*v)));
    if (!std::filesystem::exists(p)) throw ConfigError(key, "no such file '" + p.string() + "'");
    return p;
}

inline std::optional<std::filesystem::path> optional_path(const KeyValues& kv, const std::filesystem::path& base,
                                                          const std::string& key) {
    const auto v = kv.get(key);
    if (!v || text::trim(*v).empty()) return std::nullopt;
    return existing_path(kv, base, key);
}

inline std::string choice(const KeyValues& kv, const std::string& key, std::initializer_list<const char*> allowed) {
    const auto v = text::to_lower(text::trim(kv.get_or(key, *allowed.begin())));
    for (const auto* a : allowed)
        if (v == a) return v;
    std::string msg = "expected one of";
    for (const auto* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(key, msg);
}

}  // namespace detail

inline PipelineConfig parse_config(const KeyValues& kv, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    c.raw = kv;
    c.data_path = detail::existing_path(kv, base_dir, "data.path");
    c.data_kind = detail::choice(kv, "data.kind", {"import", "store"}) == "store" ? DataKind::store : DataKind::import;
    c.mapping_path = detail::optional_path(kv, base_dir, "data.mapping");
    c.lexicon_analytical = detail::existing_path(kv, base_dir, "lexicon.analytical");
    c.lexicon_certainty = detail::existing_path(kv, base_dir, "lexicon.certainty");
    c.lexicon_defensive = detail::existing_path(kv, base_dir, "lexicon.defensive");
    c.lexicon_formal = detail::existing_path(kv, base_dir, "lexicon.formal");
    c.references_path = detail::existing_path(kv, base_dir, "references.path");

    c.remote_similarity = detail::choice(kv, "similarity.provider", {"lexical", "remote"}) == "remote";
    c.similarity_url = kv.get_or("similarity.url", "");
    c.similarity_token_env = kv.get_or("similarity.token_env", "");
    if (c.remote_similarity && c.similarity_url.empty())
        throw ConfigError("similarity.url", "required when similarity.provider = remote");
    c.aggregation = detail::choice(kv, "appropriateness.aggregate", {"max", "mean"}) == "mean"
                        ? textmetrics::Aggregation::mean
                        : textmetrics::Aggregation::max;

    const auto min_chars = kv.get_int("qc.min_chars", 50);
    if (min_chars < 0) throw ConfigError("qc.min_chars", "must be non-negative");
    c.min_chars = static_cast<std::size_t>(min_chars);
    c.blocklist_path = detail::optional_path(kv, base_dir, "qc.blocklist");

    c.thresholds.alpha = kv.get_double("threshold.alpha", 0.05);
    if (!(c.thresholds.alpha > 0.0 && c.thresholds.alpha < 1.0))
        throw ConfigError("threshold.alpha", "must lie in (0, 1)");
    c.thresholds.min_es = kv.get_double("threshold.min_es", 20.0);
    if (c.thresholds.min_es < 0.0) throw ConfigError("threshold.min_es", "must be non-negative");
    c.trend = kv.get_double("threshold.trend", 0.075);
    if (c.trend < c.thresholds.alpha || c.trend > 1.0)
        throw ConfigError("threshold.trend", "must lie between threshold.alpha and 1");
    c.denominator = detail::choice(kv, "profile.denominator", {"cell", "condition"}) == "condition"
                        ? Denominator::condition
                        : Denominator::cell;
    c.polarity = verdict::PolarityTable::from(kv);

    const auto seed = kv.get_int("seed", 0);
    if (seed < 0) throw ConfigError("seed", "must be non-negative");
    c.seed = static_cast<std::uint64_t>(seed);
    const auto threads = kv.get_int("threads", 0);
    if (threads < 0) throw ConfigError("threads", "must be non-negative");
    c.threads = static_cast<std::size_t>(threads);
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("--config", "no such file '" + path.string() + "'");
    return parse_config(KeyValues::load(path.string()), path.parent_path());
}

}  // namespace threatbench::reporter
