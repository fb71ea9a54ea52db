// Acceptance runner: one line per criterion, [PASS] / [FAIL] / [BLOCKED].
//
//   threatbench_acceptance --group core|dataset|all
//
// The dataset group reads the released response dataset from the path in
// THREATBENCH_DATASET (THREATBENCH_DATASET_MAPPING optionally names a field
// mapping). Without it those criteria are BLOCKED and the exit code is 77.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "oracle/metrics.hpp"
#include "threatbench/reporter.hpp"
#include "threatbench/statlab.hpp"
#include "threatbench/textmetrics.hpp"

using namespace threatbench;

namespace {

enum class Status { pass, fail, blocked };

struct Outcome {
    Status status;
    std::string detail;
};

// Tolerances.
constexpr double kStatTol = 0.001;      // welch t and df
constexpr double kPTol = 0.0005;        // p_value(2, 10)
constexpr double kRatioTol = 1e-9;      // metric ratios against the oracle
constexpr double kFkTol = 0.01;         // flesch_kincaid("The cat sat.")
constexpr double kReplicationRel = 0.05;  // structural replication, relative
constexpr double kStatsBudget = 1.0;    // seconds
constexpr double kMetricsBudget = 5.0;
constexpr double kStructuralBudget = 120.0;

std::string num(double v, int digits = 4) { return text::format_fixed(v, digits); }

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

struct Collector {
    std::vector<std::string> failures;
    void check(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    Outcome outcome(const std::string& summary) const {
        if (failures.empty()) return {Status::pass, summary};
        std::string d;
        for (const auto& f : failures) d += (d.empty() ? "" : "; ") + f;
        return {Status::fail, d + " | " + summary};
    }
};

// --- statistical kernel ----------------------------------------------------

Outcome stats_kernel() {
    Collector c;
    const std::vector<double> a{2, 4, 6}, b{1, 2, 3};
    const auto w = statlab::welch_t(a, b);
    c.check(w.has_value(), "welch_t undefined");
    if (w) {
        c.check(near(w->t, 1.549, kStatTol), "welch t " + num(w->t) + " != 1.549");
        c.check(near(w->df, 2.941, kStatTol), "welch df " + num(w->df) + " != 2.941");
    }
    const std::vector<double> p1{0.01, 0.02, 0.03, 0.04};
    for (double q : statlab::bh_fdr(p1)) c.check(q == 0.04, "bh_fdr([.01,.02,.03,.04]) gave " + num(q, 6));
    const std::vector<double> p2{0.005, 0.04, 0.6}, want2{0.015, 0.06, 0.6};
    const auto q2 = statlab::bh_fdr(p2);
    for (std::size_t i = 0; i < 3; ++i)
        c.check(near(q2[i], want2[i], 1e-12), "bh_fdr([.005,.04,.6])[" + std::to_string(i) + "] = " + num(q2[i], 6));
    const double p = statlab::p_value(2.0, 10);
    c.check(near(p, 0.0734, kPTol), "p_value(2, 10) = " + num(p));
    const auto n = statlab::required_n(1.5, 0.5, 0.05, 0.2);
    c.check(n == 142, "required_n = " + std::to_string(n));
    return c.outcome("t=" + (w ? num(w->t) : "n/a") + " df=" + (w ? num(w->df) : "n/a") + " p=" + num(p) +
                     " n=" + std::to_string(n));
}

// --- metric oracle suite ---------------------------------------------------

Outcome metric_oracles() {
    const std::string data = THREATBENCH_DATA_DIR;
    using namespace textmetrics;
    const LexiconSet lexicons{Lexicon::load(LexiconCategory::analytical, data + "/lexicons/analytical.txt"),
                              Lexicon::load(LexiconCategory::certainty, data + "/lexicons/certainty.txt"),
                              Lexicon::load(LexiconCategory::defensive, data + "/lexicons/defensive.txt"),
                              Lexicon::load(LexiconCategory::formal, data + "/lexicons/formal.txt")};
    const auto refs = ReferenceSet::load(data + "/references.tsv");
    LexicalSimilarity provider(refs.all_passages());
    const MetricContext ctx{lexicons, refs, provider};

    const auto olex = oracle::Lexicons::load(data + "/lexicons");
    const auto orefs = oracle::read_references(data + "/references.tsv");
    std::vector<std::string> corpus;
    for (const auto& [_, v] : orefs) corpus.insert(corpus.end(), v.begin(), v.end());
    const oracle::Tfidf tfidf(corpus);

    Collector c;
    std::ifstream in(THREATBENCH_FIXTURE_DIR "/metric_responses.jsonl");
    std::size_t n = 0, compared = 0;
    for (std::string line; std::getline(in, line);) {
        if (text::trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto id = j["id"].get<std::string>();
        const auto domain = parse_domain(j["domain"].get<std::string>());
        const auto txt = j["text"].get<std::string>();
        ++n;
        if (!domain) {
            c.check(false, id + ": unknown domain");
            continue;
        }
        const auto v = metric_vector(txt, *domain, ctx);
        if (!v.complete()) {
            c.check(false, id + ": incomplete metric vector");
            continue;
        }
        const auto o = oracle::score(txt, orefs.at(std::string(domain_info(*domain).key)), olex, tfidf);
        const std::vector<std::pair<MetricId, double>> want{
            {MetricId::length, o.length},         {MetricId::words, o.words},
            {MetricId::sentences, o.sentences},   {MetricId::analytical, o.analytical},
            {MetricId::certainty, o.certainty},   {MetricId::complexity, o.complexity},
            {MetricId::appropriateness, o.appropriateness}, {MetricId::defensive, o.defensive},
            {MetricId::formal, o.formal},         {MetricId::diversity, o.diversity},
            {MetricId::avg_sentence_len, o.avg_sentence_len}};
        for (const auto& [m, expected] : want) {
            const bool count = m == MetricId::length || m == MetricId::words || m == MetricId::sentences;
            const double got = v.value(m);
            c.check(count ? got == expected : near(got, expected, kRatioTol),
                    id + " " + std::string(display_name(m)) + " " + num(got, 12) + " vs " + num(expected, 12));
            ++compared;
        }
    }
    c.check(n == 50, "fixture has " + std::to_string(n) + " responses, expected 50");
    const double fk = flesch_kincaid("The cat sat.");
    c.check(near(fk, -2.62, kFkTol), "flesch_kincaid(\"The cat sat.\") = " + num(fk));
    return c.outcome(std::to_string(n) + " responses, " + std::to_string(compared) + " values; FK(\"The cat sat.\") = " +
                     num(fk, 2));
}

// --- dataset criteria ------------------------------------------------------

struct Dataset {
    std::vector<ResponseRecord> raw;
    reporter::PipelineConfig cfg;
};

bool dataset_configured() {
    const char* path = std::getenv("THREATBENCH_DATASET");
    return path && *path;
}

std::optional<Dataset> load_dataset() {
    if (!dataset_configured()) return std::nullopt;
    const std::string path = std::filesystem::absolute(std::getenv("THREATBENCH_DATASET")).string();
    std::string conf = "data.path = " + path +
                       "\ndata.kind = import\n"
                       "lexicon.analytical = lexicons/analytical.txt\nlexicon.certainty = lexicons/certainty.txt\n"
                       "lexicon.defensive = lexicons/defensive.txt\nlexicon.formal = lexicons/formal.txt\n"
                       "references.path = references.tsv\nqc.blocklist = blocklist.txt\nseed = 7\n";
    if (const char* mapping = std::getenv("THREATBENCH_DATASET_MAPPING"); mapping && *mapping)
        conf += "data.mapping = " + std::filesystem::absolute(mapping).string() + "\n";
    Dataset d;
    d.cfg = reporter::parse_config(KeyValues::parse(conf), THREATBENCH_DATA_DIR);
    d.raw = reporter::read_source(d.cfg);
    return d;
}

const statlab::EffectResult* find_effect(const verdict::Classification& cl, const char* model, DomainId d, ThreatKind t,
                                         MetricId m) {
    const auto match = [&](const statlab::EffectResult& e) {
        return e.metric == m && e.condition.domain == d && e.condition.threat == t &&
               detail::alnum_lower(e.condition.model.name()) == detail::alnum_lower(model);
    };
    for (const auto& c : cl.classified)
        if (match(c.effect)) return &c.effect;
    for (const auto& e : cl.unclassifiable)
        if (match(e)) return &e;
    return nullptr;
}

Outcome structural(const Dataset& d, const reporter::ReportBundle& b) {
    Collector c;
    c.check(d.raw.size() == 3390, "record count " + std::to_string(d.raw.size()) + " != 3390");
    std::map<std::string, std::size_t> per_model;
    for (const auto& r : d.raw) ++per_model[detail::alnum_lower(r.condition.model.name())];
    const std::map<std::string, std::size_t> want{{"claude", 1110}, {"gpt4", 1140}, {"gemini", 1140}};
    for (const auto& [m, n] : want)
        c.check(per_model[m] == n, m + " count " + std::to_string(per_model[m]) + " != " + std::to_string(n));

    std::string got;
    const std::vector<std::pair<MetricId, double>> targets{
        {MetricId::length, 172.9}, {MetricId::words, 169.0}, {MetricId::sentences, 146.0}};
    for (const auto& [m, target] : targets) {
        const auto* e = find_effect(b.classification, "Claude", DomainId::policy, ThreatKind::role, m);
        const std::string name(display_name(m));
        if (!e || !e->enhancement_pct) {
            c.check(false, name + " change for Policy-Claude-Role unavailable");
            continue;
        }
        const double dev = std::fabs(*e->enhancement_pct - target) / target;
        c.check(dev <= kReplicationRel, name + " " + reporter::signed_pct(*e->enhancement_pct) + " vs +" +
                                            num(target, 1) + "% (" + num(dev * 100, 1) + "% off)");
        got += (got.empty() ? "" : ", ") + name + " " + reporter::signed_pct(*e->enhancement_pct);
    }
    return c.outcome(std::to_string(d.raw.size()) + " records; Policy-Claude-Role " + got);
}

Outcome approximate(const reporter::ReportBundle& b) {
    Collector c;
    std::ostringstream report;
    const auto dev = [&](const std::string& name, std::optional<double> got, double target) {
        if (!got) {
            c.check(false, name + " not produced");
            return;
        }
        report << "\n    " << name << ": " << num(*got, 3) << " (reference " << num(target, 3) << ", deviation "
               << num(*got - target, 3) << ")";
        c.check((*got < 0) == (target < 0) || *got == 0.0, name + " has the opposite sign");
    };
    const auto pct_of = [&](MetricId m) -> std::optional<double> {
        const auto* e = find_effect(b.classification, "Claude", DomainId::policy, ThreatKind::role, m);
        return e ? e->enhancement_pct : std::nullopt;
    };
    dev("certainty change, Policy-Claude-Role (%)", pct_of(MetricId::certainty), -77.8);
    dev("formal change, Policy-Claude-Role (%)", pct_of(MetricId::formal), 1336.0);
    dev("role enhancement rate", b.role_enhancement.rate, 0.227);
    dev("vulnerability-enhancement r", b.correlation ? std::optional<double>(b.correlation->r) : std::nullopt, -0.34);

    const std::map<DomainId, std::pair<double, double>> published_rates{
        {DomainId::policy, {0.508, 0.121}},       {DomainId::judicial, {0.418, 0.091}},
        {DomainId::medical, {0.281, 0.068}},      {DomainId::technological, {0.257, 0.053}},
        {DomainId::strategic, {0.189, 0.032}},    {DomainId::summarization, {0.152, 0.087}},
        {DomainId::creative, {0.030, 0.011}},     {DomainId::programming, {0.023, 0.008}},
        {DomainId::translation, {0.011, 0.003}},  {DomainId::question_answering, {0.008, 0.002}}};
    for (const auto& row : b.domain_profile) {
        const auto& [v, e] = published_rates.at(row.domain);
        report << "\n    " << domain_info(row.domain).name << ": vulnerability " << reporter::pct(row.vulnerability_rate)
               << " (reference " << reporter::pct(v) << "), enhancement " << reporter::pct(row.enhancement_rate)
               << " (reference " << reporter::pct(e) << ")";
    }
    const std::map<Complexity, double> tiers{{Complexity::high, 0.31}, {Complexity::medium, 0.18}, {Complexity::low, 0.08}};
    for (const auto& [tier, tr] : verdict::positive_effect_distribution(b.classification.classified))
        dev(std::string(to_string(tier)) + " tier positive-effect rate", tr.rate.rate, tiers.at(tier));

    auto ranked = b.domain_profile;
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& x, const auto& y) { return x.vulnerability_rate > y.vulnerability_rate; });
    const std::vector<DomainId> top{DomainId::policy, DomainId::judicial, DomainId::medical};
    std::string order;
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i)
        order += (order.empty() ? "" : " > ") + std::string(domain_info(ranked[i].domain).short_name);
    c.check(ranked.size() >= 3 && ranked[0].domain == top[0] && ranked[1].domain == top[1] && ranked[2].domain == top[2],
            "top domains by vulnerability rate: " + order);
    return c.outcome("non-binding; top three " + order + report.str());
}

// --- driver ----------------------------------------------------------------

int exit_code = 0;

void emit(const std::string& name, const Outcome& o, double seconds, double budget = 0.0) {
    Outcome out = o;
    if (out.status == Status::pass && budget > 0.0 && seconds > budget) {
        out.status = Status::fail;
        out.detail = "runtime " + num(seconds, 3) + " s over the " + num(budget, 0) + " s budget";
    }
    const char* tag = out.status == Status::pass ? "[PASS]" : out.status == Status::fail ? "[FAIL]" : "[BLOCKED]";
    std::cout << tag << ' ' << name << " (" << num(seconds, 3) << " s): " << out.detail << std::endl;
    if (out.status == Status::fail) exit_code = 1;
    else if (out.status == Status::blocked && exit_code == 0) exit_code = 77;
}

template <typename F>
void run(const std::string& name, double budget, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = f();
    } catch (const std::exception& e) {
        o = {Status::fail, std::string("exception: ") + e.what()};
    }
    emit(name, o, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), budget);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"threatbench acceptance criteria"};
    std::string group = "all";
    app.add_option("--group", group, "core, dataset or all")
        ->check(CLI::IsMember({"core", "dataset", "all"}))
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    if (group == "core" || group == "all") {
        run("statistical kernel oracle suite", kStatsBudget, stats_kernel);
        run("metric oracle suite", kMetricsBudget, metric_oracles);
    }
    if (group == "dataset" || group == "all") {
        std::optional<Dataset> d;
        std::optional<reporter::ReportBundle> bundle;
        run("dataset structural replication", kStructuralBudget, [&]() -> Outcome {
            d = load_dataset();
            if (!d) return {Status::blocked, "set THREATBENCH_DATASET to the released dataset"};
            bundle = reporter::build_report(d->cfg);
            return structural(*d, *bundle);
        });
        run("approximate replication", 0.0, [&]() -> Outcome {
            if (!bundle && !dataset_configured()) return {Status::blocked, "set THREATBENCH_DATASET to the released dataset"};
            if (!bundle) return {Status::fail, "dataset pipeline did not complete"};
            return approximate(*bundle);
        });
    }
    return exit_code;
}
