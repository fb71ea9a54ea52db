#pragma once

// Dual-outcome classification of tested effects: each significant change is
// a vulnerability or an enhancement depending on the metric's beneficial
// direction.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "threatbench/corpus.hpp"
#include "threatbench/error.hpp"
#include "threatbench/keyvalue.hpp"
#include "threatbench/statlab.hpp"
#include "threatbench/text.hpp"
#include "threatbench/textmetrics/metric_vector.hpp"

namespace threatbench::verdict {

using statlab::EffectResult;

// Which direction of change is beneficial. `context` metrics are tested but
// never labeled either way.
enum class Polarity { up, down, context };

inline std::string_view to_string(Polarity p) {
    switch (p) {
        case Polarity::up: return "up";
        case Polarity::down: return "down";
        case Polarity::context: return "context";
    }
    return "?";
}

inline std::optional<Polarity> parse_polarity(std::string_view s) {
    const auto k = text::to_lower(text::trim(s));
    if (k == "up") return Polarity::up;
    if (k == "down") return Polarity::down;
    if (k == "context") return Polarity::context;
    return std::nullopt;
}

class PolarityTable {
public:
    // Certainty is up-beneficial: a drop in confidence is the vulnerability.
    PolarityTable() {
        table_.fill(Polarity::up);
        set(MetricId::defensive, Polarity::context);
    }

    // Reads `polarity.<metric> = up|down|context` overrides.
    static PolarityTable from(const KeyValues& kv) {
        PolarityTable t;
        for (const auto& [key, value] : kv.entries()) {
            if (!key.starts_with("polarity.")) continue;
            const auto metric = parse_metric(std::string_view(key).substr(9));
            if (!metric) throw ConfigError(key, "unknown metric");
            const auto p = parse_polarity(value);
            if (!p) throw ConfigError(key, "expected up, down or context");
            t.set(*metric, *p);
        }
        return t;
    }

    Polarity get(MetricId m) const { return table_[static_cast<std::size_t>(m)]; }
    void set(MetricId m, Polarity p) { table_[static_cast<std::size_t>(m)] = p; }

private:
    std::array<Polarity, kMetricCount> table_{};
};

enum class Branch { vulnerability, enhancement, neutral };

inline std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::vulnerability: return "vulnerability";
        case Branch::enhancement: return "enhancement";
        case Branch::neutral: return "neutral";
    }
    return "?";
}

// Sign of the change picks the branch; no change is neutral.
inline Branch dual_score(double delta) {
    if (!std::isfinite(delta)) throw DomainError("dual_score: delta must be finite");
    if (delta < 0.0) return Branch::vulnerability;
    if (delta > 0.0) return Branch::enhancement;
    return Branch::neutral;
}

enum class Label { vulnerability, enhancement, neutral, not_significant };

inline constexpr std::array<Label, 4> kAllLabels{Label::vulnerability, Label::enhancement, Label::neutral,
                                                 Label::not_significant};

inline std::string_view to_string(Label l) {
    switch (l) {
        case Label::vulnerability: return "vulnerability";
        case Label::enhancement: return "enhancement";
        case Label::neutral: return "neutral";
        case Label::not_significant: return "not_significant";
    }
    return "?";
}

struct Thresholds {
    double alpha = 0.05;   // on p_fdr
    double min_es = 20.0;  // |effect_size_pct| must exceed this
};

struct ClassifiedEffect {
    EffectResult effect;
    Label label{};
    std::string rule;
};

class UnclassifiableEffect : public Error {
public:
    using Error::Error;
};

namespace detail {

inline std::string num(double v) { return text::format_number(v, 6); }

}  // namespace detail

inline ClassifiedEffect classify(const EffectResult& e, const PolarityTable& polarity, const Thresholds& thr = {}) {
    if (!e.effect_size_pct)
        throw UnclassifiableEffect("effect size undefined for " + std::string(to_string(e.metric)) + " in " +
                                   triple_label(e.condition) + " (zero control spread)");
    const double es = *e.effect_size_pct;
    const std::string p_part = "p_fdr=" + detail::num(e.p_fdr);
    if (!(e.p_fdr < thr.alpha)) return {e, Label::not_significant, p_part + " >= " + detail::num(thr.alpha)};

    std::string rule = p_part + " < " + detail::num(thr.alpha) + "; |ES|=" + detail::num(std::fabs(es));
    if (!(std::fabs(es) > thr.min_es)) return {e, Label::neutral, rule + " <= " + detail::num(thr.min_es)};
    rule += " > " + detail::num(thr.min_es);

    const auto branch = dual_score(e.delta);
    const auto pol = polarity.get(e.metric);
    rule += "; delta " + std::string(branch == Branch::enhancement ? "> 0" : "< 0") + "; polarity " +
            std::string(to_string(pol));
    if (pol == Polarity::context || branch == Branch::neutral) return {e, Label::neutral, rule};
    const bool beneficial = (branch == Branch::enhancement) == (pol == Polarity::up);
    return {e, beneficial ? Label::enhancement : Label::vulnerability, rule};
}

struct Classification {
    std::vector<ClassifiedEffect> classified;
    std::vector<EffectResult> unclassifiable;
};

inline Classification classify_all(const std::vector<EffectResult>& effects, const PolarityTable& polarity,
                                   const Thresholds& thr = {}) {
    Classification out;
    out.classified.reserve(effects.size());
    for (const auto& e : effects) {
        try {
            out.classified.push_back(classify(e, polarity, thr));
        } catch (const UnclassifiableEffect&) {
            out.unclassifiable.push_back(e);
        }
    }
    return out;
}

inline std::map<Label, std::size_t> label_counts(const std::vector<ClassifiedEffect>& classified) {
    std::map<Label, std::size_t> out;
    for (const auto l : kAllLabels) out[l] = 0;
    for (const auto& c : classified) ++out[c.label];
    return out;
}

using ConditionFilter = std::function<bool(const ExperimentCondition&)>;

struct ConditionRate {
    std::size_t conditions = 0;  // distinct conditions passing the filter
    std::size_t hits = 0;        // of those, conditions carrying the label
    std::optional<double> rate;  // hits / conditions; unset when nothing passes
};

// Share of filtered conditions with at least one effect labeled `label`.
inline ConditionRate condition_rate(const std::vector<ClassifiedEffect>& classified, Label label,
                                    const ConditionFilter& filter) {
    std::set<ExperimentCondition> seen, hit;
    for (const auto& c : classified) {
        if (!filter(c.effect.condition)) continue;
        seen.insert(c.effect.condition);
        if (c.label == label) hit.insert(c.effect.condition);
    }
    ConditionRate r{seen.size(), hit.size(), std::nullopt};
    if (!seen.empty()) r.rate = static_cast<double>(hit.size()) / static_cast<double>(seen.size());
    return r;
}

inline ConditionRate enhancement_rate(const std::vector<ClassifiedEffect>& classified, const ConditionFilter& filter) {
    return condition_rate(classified, Label::enhancement, filter);
}

struct TierRate {
    ConditionRate rate;
    std::string note;  // set for tiers with no conditions
};

// Per complexity tier: share of conditions with at least one enhancement.
inline std::map<Complexity, TierRate> positive_effect_distribution(const std::vector<ClassifiedEffect>& classified) {
    std::map<Complexity, TierRate> out;
    for (const auto tier : {Complexity::high, Complexity::medium, Complexity::low}) {
        TierRate tr;
        tr.rate = enhancement_rate(classified,
                                   [tier](const ExperimentCondition& c) { return domain_info(c.domain).tier == tier; });
        if (tr.rate.conditions == 0) {
            tr.rate.rate = 0.0;
            tr.note = "no conditions in tier";
        }
        out[tier] = tr;
    }
    return out;
}

struct Correlation {
    double r = 0.0;
    double p = 1.0;               // two-tailed, t = r sqrt((n-2)/(1-r^2))
    std::size_t conditions = 0;  // conditions with both sides present
};

// Per condition, the mean |ES| of effects on the vulnerability side and on
// the enhancement side (direction relative to polarity; context metrics and
// zero changes excluded), correlated across conditions that have both.
inline std::optional<Correlation> vulnerability_enhancement_correlation(
    const std::vector<ClassifiedEffect>& classified, const PolarityTable& polarity) {
    struct Sides {
        double neg = 0.0, pos = 0.0;
        std::size_t n_neg = 0, n_pos = 0;
    };
    std::map<ExperimentCondition, Sides> per;
    for (const auto& c : classified) {
        const auto& e = c.effect;
        const auto pol = polarity.get(e.metric);
        if (pol == Polarity::context || !e.effect_size_pct) continue;
        const auto branch = dual_score(pol == Polarity::up ? e.delta : -e.delta);
        if (branch == Branch::neutral) continue;
        auto& s = per[e.condition];
        if (branch == Branch::vulnerability) {
            s.neg += std::fabs(*e.effect_size_pct);
            ++s.n_neg;
        } else {
            s.pos += std::fabs(*e.effect_size_pct);
            ++s.n_pos;
        }
    }
    std::vector<double> xs, ys;
    for (const auto& [cond, s] : per) {
        if (s.n_neg == 0 || s.n_pos == 0) continue;
        xs.push_back(s.neg / static_cast<double>(s.n_neg));
        ys.push_back(s.pos / static_cast<double>(s.n_pos));
    }
    if (xs.size() < 2) return std::nullopt;
    const auto r = statlab::pearson_r(xs, ys);
    if (!r) return std::nullopt;
    Correlation out{*r, 0.0, xs.size()};
    if (xs.size() > 2 && std::fabs(*r) < 1.0) {
        const double df = static_cast<double>(xs.size() - 2);
        out.p = statlab::p_value(*r * std::sqrt(df / (1.0 - *r * *r)), df);
    } else if (xs.size() == 2) {
        out.p = 1.0;
    }
    return out;
}

inline void write_classified_csv(std::ostream& os, const std::vector<ClassifiedEffect>& classified) {
    auto header = statlab::effect_columns();
    header.push_back("label");
    header.push_back("rule");
    os << statlab::detail::join_csv(header) << '\n';
    for (const auto& c : classified) {
        auto fields = statlab::effect_fields(c.effect);
        fields.emplace_back(to_string(c.label));
        fields.push_back(c.rule);
        os << statlab::detail::join_csv(fields) << '\n';
    }
}

}  // namespace threatbench::verdict
