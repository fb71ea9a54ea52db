#pragma once

// Effect sizes, Welch's t-test, Benjamini-Hochberg, power analysis and
// Pearson correlation. Degenerate inputs yield std::nullopt rather than a
// made-up number.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "threatbench/error.hpp"
#include "threatbench/statlab/special.hpp"

namespace threatbench::statlab {

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;  // n - 1 denominator; 0 when n < 2
};

inline SampleSummary summarize(std::span<const double> xs) {
    SampleSummary s;
    s.n = xs.size();
    if (s.n == 0) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    return s;
}

inline double delta(const SampleSummary& threat, const SampleSummary& control) {
    return threat.mean - control.mean;
}

// Delta in units of the control group's standard deviation, as a percentage.
// A zero-spread control yields 0 for a zero delta and no value otherwise.
inline std::optional<double> effect_size_pct(double d, double control_sd) {
    if (control_sd < 0.0) throw DomainError("effect_size_pct: negative standard deviation");
    if (control_sd == 0.0) return d == 0.0 ? std::optional<double>(0.0) : std::nullopt;
    return d / control_sd * 100.0;
}

// Relative change of the mean versus control, as a percentage.
inline std::optional<double> enhancement_pct(double threat_mean, double control_mean) {
    if (control_mean == 0.0) return std::nullopt;
    return (threat_mean - control_mean) / control_mean * 100.0;
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
};

// Welch's unequal-variance t with Welch-Satterthwaite degrees of freedom.
// No result when either group has fewer than two observations or both
// groups have zero variance.
inline std::optional<WelchResult> welch_t(const SampleSummary& a, const SampleSummary& b) {
    if (a.n < 2 || b.n < 2) return std::nullopt;
    const double va = a.sd * a.sd / static_cast<double>(a.n);
    const double vb = b.sd * b.sd / static_cast<double>(b.n);
    const double se2 = va + vb;
    if (se2 == 0.0) return std::nullopt;
    const double df = se2 * se2 / (va * va / static_cast<double>(a.n - 1) + vb * vb / static_cast<double>(b.n - 1));
    return WelchResult{(a.mean - b.mean) / std::sqrt(se2), df};
}

inline std::optional<WelchResult> welch_t(std::span<const double> a, std::span<const double> b) {
    return welch_t(summarize(a), summarize(b));
}

// Two-tailed p-value of Student's t.
inline double p_value(double t, double df) { return student_t_two_tailed(t, df); }

// Benjamini-Hochberg step-up adjustment, returned in input order.
inline std::vector<double> bh_fdr(std::span<const double> p) {
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("bh_fdr: p-values must lie in [0, 1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        const std::size_t i = order[k];
        running = std::min(running, p[i] * static_cast<double>(m) / static_cast<double>(k + 1));
        // p * m / rank >= p exactly; the max guards against rounding below p
        adj[i] = std::min(1.0, std::max(p[i], running));
    }
    return adj;
}

// Per-group sample size for a two-sample comparison:
// n = 2 (z_{alpha/2} + z_beta)^2 sigma^2 / delta^2, rounded up.
// `beta` is the type II error rate (power = 1 - beta).
inline std::size_t required_n(double sigma, double delta, double alpha, double beta) {
    if (!(sigma > 0.0)) throw DomainError("required_n: sigma must be positive");
    if (!(delta > 0.0)) throw DomainError("required_n: delta must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("required_n: alpha must lie in (0, 1)");
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("required_n: beta must lie in (0, 1)");
    const double z = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(1.0 - beta);
    const double n = 2.0 * z * z * sigma * sigma / (delta * delta);
    return static_cast<std::size_t>(std::ceil(n - 1e-9));
}

// Normal-approximation power of a two-sided two-sample test for a
// standardized effect `d`.
inline double achieved_power(std::size_t n1, std::size_t n2, double d, double alpha) {
    if (n1 < 2 || n2 < 2) throw DomainError("achieved_power: each group needs n >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("achieved_power: alpha must lie in (0, 1)");
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double a = static_cast<double>(n1);
    const double b = static_cast<double>(n2);
    const double lambda = std::fabs(d) * std::sqrt(a * b / (a + b));
    return std::clamp(normal_cdf(lambda - z) + normal_cdf(-lambda - z), 0.0, 1.0);
}

inline std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("pearson_r: length mismatch");
    if (x.size() < 2) throw DomainError("pearson_r: need at least two pairs");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace threatbench::statlab
