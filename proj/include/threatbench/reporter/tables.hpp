#pragma once

// Summary tables built from classified effects.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "threatbench/corpus.hpp"
#include "threatbench/verdict.hpp"

namespace threatbench::reporter {

using verdict::ClassifiedEffect;
using verdict::Label;

// What a domain's vulnerability / enhancement rate is a share of.
enum class Denominator {
    cell,       // tested (metric, condition) effects
    condition,  // conditions; a condition counts if any of its effects carries the label
};

inline std::string_view to_string(Denominator d) { return d == Denominator::cell ? "cell" : "condition"; }

struct Extremes {
    double max_positive = 0.0;  // >= 0
    double max_negative = 0.0;  // <= 0

    void add(const std::optional<double>& v) {
        if (!v) return;
        max_positive = std::max(max_positive, *v);
        max_negative = std::min(max_negative, *v);
    }
};

struct DomainProfileRow {
    DomainId domain{};
    std::size_t effects = 0;
    std::size_t conditions = 0;
    std::size_t vulnerabilities = 0;  // numerator under the chosen denominator
    std::size_t enhancements = 0;
    double vulnerability_rate = 0.0;
    double enhancement_rate = 0.0;
    Extremes es;        // effect_size_pct over every tested effect in the domain
    Extremes relative;  // enhancement_pct over the same effects
};

inline std::vector<DomainProfileRow> domain_profile(const std::vector<ClassifiedEffect>& classified,
                                                    Denominator denom = Denominator::cell) {
    std::map<DomainId, std::vector<const ClassifiedEffect*>> by_domain;
    for (const auto& c : classified) by_domain[c.effect.condition.domain].push_back(&c);

    std::vector<DomainProfileRow> rows;
    for (const auto& [dom, items] : by_domain) {
        DomainProfileRow row;
        row.domain = dom;
        row.effects = items.size();
        std::set<ExperimentCondition> conds, vuln_conds, enh_conds;
        std::size_t vuln_cells = 0, enh_cells = 0;
        for (const auto* c : items) {
            conds.insert(c->effect.condition);
            if (c->label == Label::vulnerability) {
                ++vuln_cells;
                vuln_conds.insert(c->effect.condition);
            } else if (c->label == Label::enhancement) {
                ++enh_cells;
                enh_conds.insert(c->effect.condition);
            }
            row.es.add(c->effect.effect_size_pct);
            row.relative.add(c->effect.enhancement_pct);
        }
        row.conditions = conds.size();
        const bool by_cell = denom == Denominator::cell;
        row.vulnerabilities = by_cell ? vuln_cells : vuln_conds.size();
        row.enhancements = by_cell ? enh_cells : enh_conds.size();
        const double n = static_cast<double>(by_cell ? row.effects : row.conditions);
        row.vulnerability_rate = static_cast<double>(row.vulnerabilities) / n;
        row.enhancement_rate = static_cast<double>(row.enhancements) / n;
        rows.push_back(row);
    }
    return rows;
}

struct MetricEnhancementRow {
    MetricId metric{};
    statlab::EffectResult best;  // largest relative increase among candidates
    bool trend = false;          // alpha <= p_fdr < trend threshold
    std::vector<std::string> tied;  // other triples sharing the maximum, sorted
};

// Per metric, the largest positive relative change among effects with
// p_fdr below the trend threshold. Equal maxima are broken by the
// lexicographically smallest domain-model-threat label.
inline std::vector<MetricEnhancementRow> metric_enhancement_table(const std::vector<ClassifiedEffect>& classified,
                                                                  const verdict::Thresholds& thr = {},
                                                                  double trend = 0.075) {
    std::vector<MetricEnhancementRow> rows;
    for (const auto m : kAllMetrics) {
        std::vector<const statlab::EffectResult*> cands;
        for (const auto& c : classified) {
            const auto& e = c.effect;
            if (e.metric == m && e.enhancement_pct && *e.enhancement_pct > 0.0 && e.p_fdr < trend)
                cands.push_back(&e);
        }
        if (cands.empty()) continue;
        double best = 0.0;
        for (const auto* e : cands) best = std::max(best, *e->enhancement_pct);
        std::vector<std::pair<std::string, const statlab::EffectResult*>> top;
        for (const auto* e : cands)
            if (*e->enhancement_pct == best) top.emplace_back(triple_label(e->condition), e);
        std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        MetricEnhancementRow row{m, *top.front().second, false, {}};
        row.trend = !(row.best.p_fdr < thr.alpha);
        for (std::size_t i = 1; i < top.size(); ++i) row.tied.push_back(top[i].first);
        rows.push_back(std::move(row));
    }
    return rows;
}

// Enhancement distribution by complexity tier. Response instances count the
// threat-group responses of conditions carrying at least one enhancement;
// the condition rate is the share of conditions doing so.
struct TierRow {
    Complexity tier{};
    std::size_t response_instances = 0;
    std::size_t enhancement_effects = 0;
    std::optional<double> avg_enhancement;  // mean relative change of enhancement effects
    double max_enhancement = 0.0;
    verdict::ConditionRate condition_rate;
    double mean_domain_vulnerability_rate = 0.0;
    double mean_domain_enhancement_rate = 0.0;
    std::size_t significant_cases = 0;  // vulnerability + enhancement labels
};

namespace detail {

// Threat-group size of a condition: the largest n over its metrics.
inline std::map<ExperimentCondition, std::size_t> threat_sizes(const std::vector<ClassifiedEffect>& classified) {
    std::map<ExperimentCondition, std::size_t> out;
    for (const auto& c : classified) {
        auto& n = out[c.effect.condition];
        n = std::max(n, c.effect.n_threat);
    }
    return out;
}

struct EnhancementStats {
    std::size_t count = 0;
    double sum = 0.0;
    double max = 0.0;

    void add(const ClassifiedEffect& c) {
        if (c.label != Label::enhancement || !c.effect.enhancement_pct) return;
        ++count;
        sum += *c.effect.enhancement_pct;
        max = std::max(max, *c.effect.enhancement_pct);
    }

    std::optional<double> mean() const {
        return count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt;
    }
};

}  // namespace detail

inline std::vector<TierRow> tier_table(const std::vector<ClassifiedEffect>& classified,
                                       Denominator denom = Denominator::cell) {
    const auto sizes = detail::threat_sizes(classified);
    const auto profile = domain_profile(classified, denom);
    std::vector<TierRow> rows;
    for (const auto tier : {Complexity::high, Complexity::medium, Complexity::low}) {
        const auto in_tier = [tier](const ExperimentCondition& c) { return domain_info(c.domain).tier == tier; };
        TierRow row;
        row.tier = tier;
        row.condition_rate = verdict::enhancement_rate(classified, in_tier);
        detail::EnhancementStats st;
        std::set<ExperimentCondition> enhanced;
        for (const auto& c : classified) {
            if (!in_tier(c.effect.condition)) continue;
            st.add(c);
            if (c.label == Label::enhancement) enhanced.insert(c.effect.condition);
            if (c.label == Label::enhancement || c.label == Label::vulnerability) ++row.significant_cases;
        }
        for (const auto& cond : enhanced) row.response_instances += sizes.at(cond);
        row.enhancement_effects = st.count;
        row.avg_enhancement = st.mean();
        row.max_enhancement = st.max;
        std::size_t n_dom = 0;
        for (const auto& p : profile) {
            if (domain_info(p.domain).tier != tier) continue;
            ++n_dom;
            row.mean_domain_vulnerability_rate += p.vulnerability_rate;
            row.mean_domain_enhancement_rate += p.enhancement_rate;
        }
        if (n_dom) {
            row.mean_domain_vulnerability_rate /= static_cast<double>(n_dom);
            row.mean_domain_enhancement_rate /= static_cast<double>(n_dom);
        }
        rows.push_back(row);
    }
    return rows;
}

struct ModelRow {
    ModelId model;
    std::size_t effects = 0;
    std::size_t enhancements = 0;
    double enhancement_rate = 0.0;  // enhancements / effects
    std::optional<double> avg_enhancement;
    std::optional<MetricId> primary_metric;  // most frequent enhanced metric
};

inline std::vector<ModelRow> model_table(const std::vector<ClassifiedEffect>& classified) {
    std::map<ModelId, std::vector<const ClassifiedEffect*>> by_model;
    for (const auto& c : classified) by_model[c.effect.condition.model].push_back(&c);
    std::vector<ModelRow> rows;
    for (const auto& [model, items] : by_model) {
        ModelRow row{model, items.size(), 0, 0.0, std::nullopt, std::nullopt};
        detail::EnhancementStats st;
        std::array<std::size_t, kMetricCount> per_metric{};
        for (const auto* c : items) {
            st.add(*c);
            if (c->label == Label::enhancement) ++per_metric[static_cast<std::size_t>(c->effect.metric)];
        }
        row.enhancements = st.count;
        row.enhancement_rate = static_cast<double>(st.count) / static_cast<double>(row.effects);
        row.avg_enhancement = st.mean();
        const auto it = std::max_element(per_metric.begin(), per_metric.end());
        if (*it > 0) row.primary_metric = kAllMetrics[static_cast<std::size_t>(it - per_metric.begin())];
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ThreatRow {
    ThreatKind threat{};
    verdict::ConditionRate vulnerability;
    verdict::ConditionRate enhancement;
    std::size_t vulnerability_effects = 0;
    std::size_t enhancement_effects = 0;
};

inline std::vector<ThreatRow> threat_table(const std::vector<ClassifiedEffect>& classified) {
    std::vector<ThreatRow> rows;
    for (const auto k : kAllThreats) {
        if (k == ThreatKind::control) continue;
        const auto is_k = [k](const ExperimentCondition& c) { return c.threat == k; };
        ThreatRow row;
        row.threat = k;
        row.vulnerability = verdict::condition_rate(classified, Label::vulnerability, is_k);
        row.enhancement = verdict::condition_rate(classified, Label::enhancement, is_k);
        if (row.vulnerability.conditions == 0) continue;
        for (const auto& c : classified) {
            if (!is_k(c.effect.condition)) continue;
            if (c.label == Label::vulnerability) ++row.vulnerability_effects;
            if (c.label == Label::enhancement) ++row.enhancement_effects;
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace threatbench::reporter
