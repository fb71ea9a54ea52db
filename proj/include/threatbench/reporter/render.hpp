#pragma once

// Plain-text, CSV and JSON renderings of the report tables.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatbench/reporter/tables.hpp"
#include "threatbench/statlab/effects.hpp"
#include "threatbench/text.hpp"
#include "threatbench/verdict.hpp"

namespace threatbench::reporter {

// Share in [0, 1] as a percentage with one decimal: 0.508 -> "50.8%".
inline std::string pct(double share) { return text::format_fixed(share * 100.0, 1) + "%"; }

// Signed percentage with one decimal: 172.93 -> "+172.9%".
inline std::string signed_pct(double v) {
    const auto s = text::format_fixed(v, 1);
    return (s.front() == '-' || s == "0.0" ? s : "+" + s) + "%";
}

inline std::string opt_signed_pct(const std::optional<double>& v) { return v ? signed_pct(*v) : "n/a"; }

inline std::string p_text(double p) { return p < 0.001 ? "<0.001" : text::format_fixed(p, 3); }

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write_text(std::ostream& os) const {
        std::vector<std::size_t> width(header.size(), 0);
        const auto measure = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
                width[i] = std::max(width[i], text::code_point_count(r[i]));
        };
        measure(header);
        for (const auto& r : rows) measure(r);
        const auto line = [&](const std::vector<std::string>& r) {
            std::string out;
            for (std::size_t i = 0; i < r.size(); ++i) {
                out += r[i];
                if (i + 1 < r.size()) out += std::string(width[i] - text::code_point_count(r[i]) + 2, ' ');
            }
            os << out << '\n';
        };
        line(header);
        std::size_t total = 0;
        for (auto w : width) total += w + 2;
        os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
        for (const auto& r : rows) line(r);
    }

    void write_csv(std::ostream& os) const {
        os << statlab::detail::join_csv(header) << '\n';
        for (const auto& r : rows) os << statlab::detail::join_csv(r) << '\n';
    }
};

inline Table domain_profile_table(const std::vector<DomainProfileRow>& rows, Denominator denom) {
    Table t{{"Domain", "Vulnerability Rate", "Enhancement Rate", "Max Positive ES", "Max Negative ES",
             "Max Positive Change", "Max Negative Change", std::string(denom == Denominator::cell ? "Effects" : "Conditions")},
            {}};
    for (const auto& r : rows)
        t.rows.push_back({std::string(domain_info(r.domain).name), pct(r.vulnerability_rate), pct(r.enhancement_rate),
                          signed_pct(r.es.max_positive), signed_pct(r.es.max_negative),
                          signed_pct(r.relative.max_positive), signed_pct(r.relative.max_negative),
                          std::to_string(denom == Denominator::cell ? r.effects : r.conditions)});
    return t;
}

inline Table metric_enhancement_text(const std::vector<MetricEnhancementRow>& rows) {
    Table t{{"Metric", "Max Enhancement", "p_fdr", "Domain-Model-Threat", "Ties"}, {}};
    for (const auto& r : rows) {
        std::string ties;
        for (const auto& s : r.tied) ties += (ties.empty() ? "" : "; ") + s;
        t.rows.push_back({std::string(display_name(r.metric)), opt_signed_pct(r.best.enhancement_pct),
                          p_text(r.best.p_fdr) + (r.trend ? " \xe2\x80\xa0" : ""), triple_label(r.best.condition),
                          ties});
    }
    return t;
}

inline Table tier_distribution_table(const std::vector<TierRow>& rows) {
    Table t{{"Tier", "Response Instances", "Enhancement Effects", "Avg. Enhancement", "Max Enhancement",
             "Conditions", "Conditions Enhanced", "Condition Rate"},
            {}};
    for (const auto& r : rows)
        t.rows.push_back({std::string(to_string(r.tier)), std::to_string(r.response_instances),
                          std::to_string(r.enhancement_effects), opt_signed_pct(r.avg_enhancement),
                          signed_pct(r.max_enhancement), std::to_string(r.condition_rate.conditions),
                          std::to_string(r.condition_rate.hits),
                          r.condition_rate.rate ? pct(*r.condition_rate.rate) : "n/a"});
    return t;
}

inline Table tier_summary_table(const std::vector<TierRow>& rows) {
    Table t{{"Tier", "Avg. Vulnerability Rate", "Avg. Enhancement Rate", "Significant Cases"}, {}};
    for (const auto& r : rows)
        t.rows.push_back({std::string(to_string(r.tier)), pct(r.mean_domain_vulnerability_rate),
                          pct(r.mean_domain_enhancement_rate), std::to_string(r.significant_cases)});
    return t;
}

inline Table model_profile_table(const std::vector<ModelRow>& rows) {
    Table t{{"Model", "Enhancement Rate", "Avg. Enhancement", "Primary Enhanced Metric", "Effects"}, {}};
    for (const auto& r : rows)
        t.rows.push_back({r.model.name(), pct(r.enhancement_rate), opt_signed_pct(r.avg_enhancement),
                          r.primary_metric ? std::string(display_name(*r.primary_metric)) : "none",
                          std::to_string(r.effects)});
    return t;
}

inline Table threat_profile_table(const std::vector<ThreatRow>& rows) {
    Table t{{"Threat", "Conditions", "Vulnerability Rate", "Enhancement Rate", "Vulnerability Effects",
             "Enhancement Effects"},
            {}};
    for (const auto& r : rows)
        t.rows.push_back({std::string(display_name(r.threat)), std::to_string(r.vulnerability.conditions),
                          r.vulnerability.rate ? pct(*r.vulnerability.rate) : "n/a",
                          r.enhancement.rate ? pct(*r.enhancement.rate) : "n/a",
                          std::to_string(r.vulnerability_effects), std::to_string(r.enhancement_effects)});
    return t;
}

// One row per response: id, condition, then every metric (empty if undefined).
inline void write_metrics_csv(std::ostream& os, const std::vector<statlab::ScoredResponse>& scored) {
    std::vector<std::string> header{"id", "model", "domain", "threat"};
    for (const auto m : kAllMetrics) header.emplace_back(to_string(m));
    os << statlab::detail::join_csv(header) << '\n';
    for (const auto& s : scored) {
        std::vector<std::string> f{s.id, s.condition.model.name(), std::string(domain_info(s.condition.domain).key),
                                   std::string(to_string(s.condition.threat))};
        for (const auto m : kAllMetrics)
            f.push_back(s.metrics.has(m) ? text::format_number(s.metrics.value(m)) : std::string());
        os << statlab::detail::join_csv(f) << '\n';
    }
}

}  // namespace threatbench::reporter
