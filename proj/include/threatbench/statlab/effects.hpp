#pragma once

// Per (metric, condition) comparison of threat responses against the
// matching control cell (same model and domain, threat = control).

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "threatbench/corpus.hpp"
#include "threatbench/statlab/tests.hpp"
#include "threatbench/text.hpp"
#include "threatbench/textmetrics/metric_vector.hpp"

namespace threatbench::statlab {

struct ScoredResponse {
    std::string id;
    ExperimentCondition condition;
    MetricVector metrics;
};

struct EffectResult {
    MetricId metric{};
    ExperimentCondition condition;
    std::size_t n_threat = 0;
    std::size_t n_control = 0;
    double mean_threat = 0.0;
    double mean_control = 0.0;
    double sd_threat = 0.0;
    double sd_control = 0.0;
    double delta = 0.0;
    std::optional<double> effect_size_pct;  // delta / control sd
    std::optional<double> enhancement_pct;  // relative change of the mean
    double t = 0.0;
    double df = 0.0;
    double p_raw = 1.0;
    double p_fdr = 1.0;
};

enum class SkipReason { no_control, too_few, zero_variance };

inline std::string_view to_string(SkipReason r) {
    switch (r) {
        case SkipReason::no_control: return "no_control_cell";
        case SkipReason::too_few: return "n_below_2";
        case SkipReason::zero_variance: return "zero_variance";
    }
    return "?";
}

struct SkippedCell {
    MetricId metric{};
    ExperimentCondition condition;
    std::size_t n_threat = 0;
    std::size_t n_control = 0;
    SkipReason reason{};
};

struct Analysis {
    std::vector<EffectResult> effects;  // condition order, then metric order
    std::vector<SkippedCell> skipped;
};

namespace detail {

inline std::vector<double> column(const std::vector<const MetricVector*>& rows, MetricId m) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto* v : rows)
        if (v->has(m)) out.push_back(v->value(m));
    return out;
}

}  // namespace detail

// Tests every metric in every non-control condition present in `responses`.
// The FDR family is the full set of tests performed here.
inline Analysis analyze(const std::vector<ScoredResponse>& responses) {
    std::map<ExperimentCondition, std::vector<const MetricVector*>> cells;
    for (const auto& r : responses) cells[r.condition].push_back(&r.metrics);

    Analysis out;
    for (const auto& [cond, rows] : cells) {
        if (cond.threat == ThreatKind::control) continue;
        const auto ctl = cells.find(ExperimentCondition{cond.model, cond.domain, ThreatKind::control});
        for (const auto m : kAllMetrics) {
            const auto xs = detail::column(rows, m);
            if (ctl == cells.end()) {
                out.skipped.push_back({m, cond, xs.size(), 0, SkipReason::no_control});
                continue;
            }
            const auto cs = detail::column(ctl->second, m);
            const auto a = summarize(xs);
            const auto b = summarize(cs);
            if (a.n < 2 || b.n < 2) {
                out.skipped.push_back({m, cond, a.n, b.n, SkipReason::too_few});
                continue;
            }
            const auto w = welch_t(a, b);
            if (!w) {
                out.skipped.push_back({m, cond, a.n, b.n, SkipReason::zero_variance});
                continue;
            }
            const double d = delta(a, b);
            EffectResult e{.metric = m,
                           .condition = cond,
                           .n_threat = a.n,
                           .n_control = b.n,
                           .mean_threat = a.mean,
                           .mean_control = b.mean,
                           .sd_threat = a.sd,
                           .sd_control = b.sd,
                           .delta = d,
                           .effect_size_pct = effect_size_pct(d, b.sd),
                           .enhancement_pct = enhancement_pct(a.mean, b.mean),
                           .t = w->t,
                           .df = w->df,
                           .p_raw = p_value(w->t, w->df),
                           .p_fdr = 1.0};
            out.effects.push_back(std::move(e));
        }
    }

    std::vector<double> p;
    p.reserve(out.effects.size());
    for (const auto& e : out.effects) p.push_back(e.p_raw);
    const auto adj = bh_fdr(p);
    for (std::size_t i = 0; i < adj.size(); ++i) out.effects[i].p_fdr = adj[i];
    return out;
}

inline const std::vector<std::string>& effect_columns() {
    static const std::vector<std::string> cols{
        "metric",     "model",       "domain",        "threat",          "n_threat",        "n_control",
        "mean_threat", "mean_control", "sd_threat",   "sd_control",      "delta",           "effect_size_pct",
        "enhancement_pct", "t",       "df",           "p_raw",           "p_fdr"};
    return cols;
}

namespace detail {

inline std::string opt_number(const std::optional<double>& v) { return v ? text::format_number(*v) : std::string(); }

inline std::string join_csv(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += text::csv_field(fields[i]);
    }
    return line;
}

}  // namespace detail

// Field values in effect_columns() order; undefined percentages are empty.
inline std::vector<std::string> effect_fields(const EffectResult& e) {
    using text::format_number;
    return {std::string(to_string(e.metric)),
            e.condition.model.name(),
            std::string(domain_info(e.condition.domain).key),
            std::string(to_string(e.condition.threat)),
            std::to_string(e.n_threat),
            std::to_string(e.n_control),
            format_number(e.mean_threat),
            format_number(e.mean_control),
            format_number(e.sd_threat),
            format_number(e.sd_control),
            format_number(e.delta),
            detail::opt_number(e.effect_size_pct),
            detail::opt_number(e.enhancement_pct),
            format_number(e.t),
            format_number(e.df),
            format_number(e.p_raw),
            format_number(e.p_fdr)};
}

inline void write_effects_csv(std::ostream& os, const std::vector<EffectResult>& effects) {
    os << detail::join_csv(effect_columns()) << '\n';
    for (const auto& e : effects) os << detail::join_csv(effect_fields(e)) << '\n';
}

inline void write_skipped_csv(std::ostream& os, const std::vector<SkippedCell>& skipped) {
    os << "metric,model,domain,threat,n_threat,n_control,reason\n";
    for (const auto& s : skipped)
        os << detail::join_csv({std::string(to_string(s.metric)), s.condition.model.name(),
                                std::string(domain_info(s.condition.domain).key),
                                std::string(to_string(s.condition.threat)), std::to_string(s.n_threat),
                                std::to_string(s.n_control), std::string(to_string(s.reason))})
           << '\n';
}

}  // namespace threatbench::statlab
