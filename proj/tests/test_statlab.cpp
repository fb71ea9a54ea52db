#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "threatbench/statlab.hpp"

using namespace threatbench;
using namespace threatbench::statlab;
using Catch::Approx;

namespace {

// Two-tailed Student-t tail by composite Simpson integration of the density
// over [0, |t|]; independent of the incomplete-beta path.
double t_tail_by_integration(double t, double df) {
    const auto density = [df](double x) {
        const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
        return c * std::pow(1 + x * x / df, -(df + 1) / 2);
    };
    const int n = 20000;
    const double h = std::fabs(t) / n;
    double s = density(0) + density(std::fabs(t));
    for (int i = 1; i < n; ++i) s += density(i * h) * (i % 2 ? 4 : 2);
    return 1.0 - 2.0 * (s * h / 3.0);
}

// BH by definition: adj_i = min over j with p_j >= p_i of p_j * m / rank_j.
std::vector<double> bh_naive(const std::vector<double>& p) {
    const std::size_t m = p.size();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto rank_i = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), p[i]) - sorted.begin());
        double best = 1.0;
        for (std::size_t r = rank_i; r < m; ++r) best = std::min(best, sorted[r] * m / (r + 1));
        out[i] = best;
    }
    return out;
}

struct Welch {
    double t, df;
};

Welch welch_naive(const std::vector<double>& a, const std::vector<double>& b) {
    const auto moments = [](const std::vector<double>& x) {
        long double mean = 0;
        for (double v : x) mean += v;
        mean /= x.size();
        long double ss = 0;
        for (double v : x) ss += (v - mean) * (v - mean);
        return std::pair<long double, long double>{mean, ss / (x.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const long double sa = va / a.size(), sb = vb / b.size();
    const long double t = (ma - mb) / std::sqrt(sa + sb);
    const long double df = (sa + sb) * (sa + sb) / (sa * sa / (a.size() - 1) + sb * sb / (b.size() - 1));
    return {static_cast<double>(t), static_cast<double>(df)};
}

std::vector<double> random_sample(std::mt19937_64& rng, std::size_t n, double mu, double sigma) {
    std::normal_distribution<double> d(mu, sigma);
    std::vector<double> out(n);
    for (auto& x : out) x = d(rng);
    return out;
}

}  // namespace

TEST_CASE("normal quantile matches reference values") {
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == Approx(1.959963984540054).epsilon(1e-14));
    CHECK(normal_quantile(0.8) == Approx(0.8416212335729143).epsilon(1e-14));
    CHECK(normal_quantile(0.999) == Approx(3.090232306167813).epsilon(1e-14));
    CHECK(normal_quantile(1e-10) == Approx(-6.361340902404056).epsilon(1e-13));
    CHECK(normal_quantile(0.025) == Approx(-normal_quantile(0.975)).epsilon(1e-15));
    CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
}

TEST_CASE("quantile inverts the cdf") {
    for (double p = 0.001; p < 1.0; p += 0.0173) CHECK(normal_cdf(normal_quantile(p)) == Approx(p).epsilon(1e-12));
}

TEST_CASE("regularized incomplete beta matches reference values") {
    CHECK(incomplete_beta(0.5, 0.5, 0.3) == Approx(0.36901011956554536).epsilon(1e-12));
    CHECK(incomplete_beta(2, 3, 0.4) == Approx(0.5248).epsilon(1e-12));
    CHECK(incomplete_beta(5, 0.5, 0.9) == Approx(0.3166429150200122).epsilon(1e-12));
    CHECK(incomplete_beta(10, 10, 0.5) == Approx(0.5).epsilon(1e-12));
    CHECK(incomplete_beta(1, 1, 0.25) == Approx(0.25).epsilon(1e-12));
    CHECK(incomplete_beta(3, 4, 0.0) == 0.0);
    CHECK(incomplete_beta(3, 4, 1.0) == 1.0);
}

TEST_CASE("delta and summaries") {
    const std::vector<double> a{4, 5, 6}, b{2, 3, 4};
    CHECK(delta(summarize(a), summarize(b)) == 2.0);
    CHECK(delta(summarize(a), summarize(a)) == 0.0);
    const auto s = summarize(a);
    CHECK(s.n == 3);
    CHECK(s.sd == Approx(1.0));
    CHECK(summarize(std::vector<double>{7.0}).sd == 0.0);

    std::mt19937_64 rng(11);
    const auto x = random_sample(rng, 37, 3.0, 2.0), y = random_sample(rng, 23, 1.0, 0.5);
    const double brute = std::accumulate(x.begin(), x.end(), 0.0) / x.size() -
                         std::accumulate(y.begin(), y.end(), 0.0) / y.size();
    CHECK(delta(summarize(x), summarize(y)) == Approx(brute).epsilon(1e-14));
}

TEST_CASE("effect size as a percentage of control spread") {
    CHECK(*effect_size_pct(2, 1) == 200.0);
    CHECK(*effect_size_pct(0, 0) == 0.0);
    CHECK_FALSE(effect_size_pct(1, 0).has_value());
    CHECK_THROWS_AS(effect_size_pct(1, -1), DomainError);
}

TEST_CASE("enhancement percentage is relative change") {
    CHECK(*enhancement_pct(300, 100) == 200.0);
    CHECK(*enhancement_pct(100, 100) == 0.0);
    CHECK(*enhancement_pct(50, 100) == -50.0);
    CHECK_FALSE(enhancement_pct(10, 0).has_value());
}

TEST_CASE("welch t on the hand-computed example") {
    const std::vector<double> a{2, 4, 6}, b{1, 2, 3};
    const auto w = welch_t(a, b);
    REQUIRE(w);
    CHECK(w->t == Approx(1.549).margin(0.001));
    CHECK(w->df == Approx(2.941).margin(0.001));
    // frozen from an independent implementation
    CHECK(w->t == Approx(1.5491933384829668).epsilon(1e-12));
    CHECK(w->df == Approx(2.9411764705882346).epsilon(1e-12));
}

TEST_CASE("welch t edge cases") {
    const std::vector<double> a{1, 2, 3, 4};
    CHECK(welch_t(a, a)->t == 0.0);
    CHECK_FALSE(welch_t(std::vector<double>{1.0}, a).has_value());
    CHECK_FALSE(welch_t(std::vector<double>{2, 2}, std::vector<double>{5, 5}).has_value());
}

TEST_CASE("welch t agrees with a direct long-double oracle") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = random_sample(rng, 2 + rep % 17, 0.5 * rep, 1.0 + rep % 5);
        const auto b = random_sample(rng, 3 + rep % 11, 0.0, 0.3 + rep % 3);
        const auto w = welch_t(a, b);
        const auto o = welch_naive(a, b);
        REQUIRE(w);
        CHECK(w->t == Approx(o.t).epsilon(1e-10));
        CHECK(w->df == Approx(o.df).epsilon(1e-10));
    }
}

TEST_CASE("property: welch t under shift, scale and swap") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        auto a = random_sample(rng, 5 + rep % 9, 1.0, 2.0);
        auto b = random_sample(rng, 4 + rep % 7, 0.0, 1.0);
        const auto base = *welch_t(a, b);
        const double shift = -50.0 + rep * 3.1;
        const double scale = 0.01 + rep * 0.7;
        auto as = a, bs = b;
        for (auto& x : as) x = x * scale + shift;
        for (auto& x : bs) x = x * scale + shift;
        const auto moved = *welch_t(as, bs);
        CHECK(moved.t == Approx(base.t).epsilon(1e-8));
        CHECK(moved.df == Approx(base.df).epsilon(1e-8));
        const auto swapped = *welch_t(b, a);
        CHECK(swapped.t == Approx(-base.t).epsilon(1e-14));
        CHECK(swapped.df == Approx(base.df).epsilon(1e-14));
    }
}

TEST_CASE("p-value reference points") {
    CHECK(p_value(0.0, 5) == Approx(1.0).epsilon(1e-14));
    CHECK(p_value(2.0, 10) == Approx(0.0734).margin(0.0005));
    CHECK(p_value(2.0, 10) == Approx(0.07338803477074039).epsilon(1e-10));
    CHECK(p_value(0.5, 3) == Approx(0.651447964848151).epsilon(1e-10));
    CHECK(p_value(3.3, 7.5) == Approx(0.011891634562261172).epsilon(1e-10));
    CHECK(p_value(1.0, 1) == Approx(0.5).epsilon(1e-10));
    CHECK(p_value(10, 30) == Approx(4.5752514082296097e-11).epsilon(1e-8));
    CHECK(p_value(-2.5, 200) == Approx(0.013223172641700793).epsilon(1e-10));
    CHECK(p_value(std::numeric_limits<double>::infinity(), 4) == 0.0);
    CHECK_THROWS_AS(p_value(1.0, 0.0), DomainError);
}

TEST_CASE("p-value agrees with numerical integration of the density") {
    for (double df : {1.5, 3.0, 7.0, 12.5, 40.0})
        for (double t : {0.1, 0.7, 1.3, 2.0, 2.9, 4.2})
            CHECK(p_value(t, df) == Approx(t_tail_by_integration(t, df)).margin(1e-9));
}

TEST_CASE("property: p-value strictly decreasing in |t|") {
    for (double df : {1.0, 2.5, 10.0, 100.0}) {
        double prev = p_value(0.0, df);
        for (double t = 0.05; t < 12.0; t += 0.05) {
            const double p = p_value(t, df);
            CHECK(p < prev);
            CHECK(p_value(-t, df) == p);
            prev = p;
        }
    }
}

TEST_CASE("Benjamini-Hochberg reference examples") {
    CHECK(bh_fdr(std::vector<double>{0.05}) == std::vector<double>{0.05});
    const auto a = bh_fdr(std::vector<double>{0.01, 0.02, 0.03, 0.04});
    for (double v : a) CHECK(v == 0.04);
    const auto b = bh_fdr(std::vector<double>{0.005, 0.04, 0.6});
    CHECK(b[0] == Approx(0.015).epsilon(1e-15));
    CHECK(b[1] == Approx(0.06).epsilon(1e-15));
    CHECK(b[2] == Approx(0.6).epsilon(1e-15));
    const auto c = bh_fdr(std::vector<double>{0.2, 0.001, 0.04, 0.04, 0.9, 0.03});
    const std::vector<double> expected{0.24, 0.006, 0.06, 0.06, 0.9, 0.06};
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == Approx(expected[i]).epsilon(1e-14));
    CHECK(bh_fdr(std::vector<double>{}).empty());
    CHECK_THROWS_AS(bh_fdr(std::vector<double>{0.1, 1.2}), DomainError);
    CHECK_THROWS_AS(bh_fdr(std::vector<double>{-0.1}), DomainError);
}

TEST_CASE("property: BH bounds, ordering, permutation and naive agreement") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 60; ++rep) {
        std::vector<double> p(1 + rep % 25);
        for (auto& x : p) x = std::pow(u(rng), 1 + rep % 4);
        if (rep % 5 == 0 && p.size() > 2) p[1] = p[0];  // ties
        const auto adj = bh_fdr(p);
        const auto naive = bh_naive(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(adj[i] >= p[i]);
            CHECK(adj[i] <= 1.0);
            CHECK(adj[i] == Approx(naive[i]).epsilon(1e-14));
            for (std::size_t j = 0; j < p.size(); ++j)
                if (p[i] < p[j]) CHECK(adj[i] <= adj[j]);
        }
        std::vector<std::size_t> perm(p.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> pp(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) pp[i] = p[perm[i]];
        const auto adj_p = bh_fdr(pp);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj_p[i] == adj[perm[i]]);
    }
}

TEST_CASE("required sample size") {
    CHECK(required_n(1.5, 0.5, 0.05, 0.2) == 142);
    CHECK(required_n(1.0, 1.0, 0.05, 0.2) == 16);
    // unrounded value from the formula, evaluated independently
    const double z = 1.959963984540054 + 0.8416212335729143;
    CHECK(2 * z * z * 2.25 / 0.25 == Approx(141.27983521828358).epsilon(1e-12));
    CHECK_THROWS_AS(required_n(0, 1, 0.05, 0.2), DomainError);
    CHECK_THROWS_AS(required_n(1, 0, 0.05, 0.2), DomainError);
    CHECK_THROWS_AS(required_n(1, 1, 1.0, 0.2), DomainError);
    CHECK_THROWS_AS(required_n(1, 1, 0.05, 0.0), DomainError);
}

TEST_CASE("property: required_n scales with sigma squared and falls with delta") {
    // doubling sigma quadruples the unrounded n, so the rounded value lands within 3
    for (double sigma : {0.3, 0.9, 1.5, 4.0}) {
        const auto n1 = required_n(sigma, 0.5, 0.05, 0.2);
        const auto n2 = required_n(2 * sigma, 0.5, 0.05, 0.2);
        CHECK(n2 >= 4 * n1 - 3);
        CHECK(n2 <= 4 * n1);
    }
    std::size_t prev = required_n(1.0, 0.05, 0.05, 0.2);
    for (double d = 0.06; d < 3.0; d += 0.01) {
        const auto n = required_n(1.0, d, 0.05, 0.2);
        CHECK(n <= prev);
        prev = n;
    }
    prev = 0;
    for (double s = 0.1; s < 5.0; s += 0.05) {
        const auto n = required_n(s, 0.7, 0.05, 0.2);
        CHECK(n >= prev);
        prev = n;
    }
}

TEST_CASE("achieved power") {
    CHECK(achieved_power(1110, 1140, 0.5, 0.05) > 0.999);
    CHECK(achieved_power(50, 50, 0.2, 0.05) == Approx(0.17007504575308746).epsilon(1e-10));
    CHECK(achieved_power(40, 40, 0.0, 0.05) == Approx(0.05).epsilon(1e-12));
    CHECK(achieved_power(40, 40, 0.0, 0.01) == Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(achieved_power(1, 40, 0.5, 0.05), DomainError);
}

TEST_CASE("property: power increases with n and d") {
    for (double d : {0.1, 0.3, 0.5, 0.8}) {
        double prev = 0.0;
        for (std::size_t n = 2; n < 400; n += 7) {
            const double p = achieved_power(n, n + 3, d, 0.05);
            CHECK(p >= prev);
            CHECK(p <= 1.0);
            prev = p;
        }
    }
    for (std::size_t n : {10u, 60u, 200u}) {
        double prev = 0.0;
        for (double d = 0.0; d < 2.0; d += 0.05) {
            const double p = achieved_power(n, n, d, 0.05);
            CHECK(p >= prev);
            prev = p;
        }
    }
}

TEST_CASE("Pearson correlation") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y(x.size()), z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = 2 * x[i] + 1;
        z[i] = -x[i];
    }
    CHECK(*pearson_r(x, y) == Approx(1.0).epsilon(1e-15));
    CHECK(*pearson_r(x, z) == Approx(-1.0).epsilon(1e-15));
    CHECK_FALSE(pearson_r(x, std::vector<double>(5, 3.0)).has_value());
    CHECK_THROWS_AS(pearson_r(x, std::vector<double>{1, 2}), DomainError);

    const std::vector<double> a{1.2, 3.4, 2.2, 5.1, 4.4, 0.3}, b{2.0, 2.9, 3.1, 6.2, 3.3, 1.0};
    CHECK(*pearson_r(a, b) == Approx(0.8791088589478435).epsilon(1e-12));
    // covariance over the product of standard deviations, computed by hand
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / 6, mb = std::accumulate(b.begin(), b.end(), 0.0) / 6;
    double cov = 0, va = 0, vb = 0;
    for (int i = 0; i < 6; ++i) {
        cov += (a[i] - ma) * (b[i] - mb);
        va += (a[i] - ma) * (a[i] - ma);
        vb += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(*pearson_r(a, b) == Approx(cov / std::sqrt(va * vb)).epsilon(1e-12));
}

TEST_CASE("property: effect size and enhancement agree in sign") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 100; ++rep) {
        const auto t = summarize(random_sample(rng, 8, 10.0 + (rep % 7 - 3), 2.0));
        const auto c = summarize(random_sample(rng, 8, 10.0, 2.0));
        REQUIRE(c.mean > 0);
        const double d = delta(t, c);
        const auto es = *effect_size_pct(d, c.sd);
        const auto rel = *enhancement_pct(t.mean, c.mean);
        CHECK((es > 0) == (rel > 0));
        CHECK((es < 0) == (rel < 0));
    }
}

namespace {

ScoredResponse scored(const std::string& id, ThreatKind k, double length, double words) {
    MetricVector v;
    v.length_chars = static_cast<std::size_t>(length);
    v.words = static_cast<std::size_t>(words);
    v.defined.set(static_cast<std::size_t>(MetricId::length));
    v.defined.set(static_cast<std::size_t>(MetricId::words));
    return {id, {ModelId("Claude"), DomainId::policy, k}, v};
}

}  // namespace

TEST_CASE("analyze compares each cell to its control") {
    std::vector<ScoredResponse> rs;
    const double ctl_len[] = {100, 110, 120, 130};
    const double role_len[] = {200, 260, 240, 300};
    for (int i = 0; i < 4; ++i) rs.push_back(scored("c" + std::to_string(i), ThreatKind::control, ctl_len[i], 20));
    for (int i = 0; i < 4; ++i) rs.push_back(scored("r" + std::to_string(i), ThreatKind::role, role_len[i], 20 + i));
    rs.push_back(scored("t0", ThreatKind::time, 90, 10));

    const auto a = analyze(rs);
    REQUIRE(a.effects.size() == 2);  // role x {length, words}
    const auto& len = a.effects[0];
    CHECK(len.metric == MetricId::length);
    CHECK(len.condition.threat == ThreatKind::role);
    CHECK(len.n_threat == 4);
    CHECK(len.n_control == 4);
    CHECK(len.delta == Approx(250.0 - 115.0));
    CHECK(*len.enhancement_pct == Approx((250.0 - 115.0) / 115.0 * 100));
    const auto w = *welch_t(std::vector<double>{200, 260, 240, 300}, std::vector<double>{100, 110, 120, 130});
    CHECK(len.t == w.t);
    CHECK(len.p_raw == p_value(w.t, w.df));
    // words: control spread is zero, threat spread is not; effect size undefined
    const auto& words = a.effects[1];
    CHECK(words.metric == MetricId::words);
    CHECK_FALSE(words.effect_size_pct.has_value());

    // the time cell has one response; the nine undefined metrics have none at all
    std::size_t time_skips = 0, role_skips = 0;
    for (const auto& s : a.skipped) {
        if (s.condition.threat == ThreatKind::time) ++time_skips;
        if (s.condition.threat == ThreatKind::role) ++role_skips;
        CHECK(s.reason == SkipReason::too_few);
    }
    CHECK(time_skips == kMetricCount);
    CHECK(role_skips == kMetricCount - 2);

    const auto adj = bh_fdr(std::vector<double>{a.effects[0].p_raw, a.effects[1].p_raw});
    CHECK(a.effects[0].p_fdr == adj[0]);
    CHECK(a.effects[1].p_fdr == adj[1]);
}

TEST_CASE("analyze reports missing control cells") {
    std::vector<ScoredResponse> rs;
    for (int i = 0; i < 3; ++i) rs.push_back(scored("g" + std::to_string(i), ThreatKind::general, 100 + i, 10 + i));
    const auto a = analyze(rs);
    CHECK(a.effects.empty());
    REQUIRE(a.skipped.size() == kMetricCount);
    CHECK(a.skipped.front().reason == SkipReason::no_control);
}

TEST_CASE("effects export has fixed columns") {
    std::vector<ScoredResponse> rs;
    for (int i = 0; i < 3; ++i) rs.push_back(scored("c" + std::to_string(i), ThreatKind::control, 100 + i, 10 + i));
    for (int i = 0; i < 3; ++i) rs.push_back(scored("a" + std::to_string(i), ThreatKind::authority, 150 + 2 * i, 12 + i));
    std::ostringstream os;
    write_effects_csv(os, analyze(rs).effects);
    const auto lines = text::split(os.str(), '\n');
    CHECK(lines[0] ==
          "metric,model,domain,threat,n_threat,n_control,mean_threat,mean_control,sd_threat,sd_control,delta,"
          "effect_size_pct,enhancement_pct,t,df,p_raw,p_fdr");
    CHECK(lines[1].rfind("length,Claude,policy,authority,3,3,152,101,2,1,51,5100,", 0) == 0);
}
