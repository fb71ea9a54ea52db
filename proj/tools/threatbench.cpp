// threatbench command-line driver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "threatbench/http_provider.hpp"
#include "threatbench/reporter.hpp"
#include "threatbench/statlab.hpp"

namespace fs = std::filesystem;
using namespace threatbench;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "threatbench-out";
};

KeyValues read_kv(const std::string& path, const char* flag) {
    if (path.empty()) throw ConfigError(flag, "required");
    if (!fs::exists(path)) throw ConfigError(flag, "no such file '" + path + "'");
    return KeyValues::load(path);
}

reporter::PipelineConfig pipeline_config(const Globals& g, const std::string& input) {
    if (g.config.empty()) throw ConfigError("--config", "required");
    auto cfg = reporter::load_config(g.config);
    if (g.seed) cfg.seed = *g.seed;
    if (!input.empty()) {
        if (!fs::exists(input)) throw ConfigError("--input", "no such file '" + input + "'");
        cfg.data_path = input;
        cfg.data_kind = reporter::DataKind::store;
    }
    return cfg;
}

// A path key of the config file, resolved against the file's directory.
std::string config_path(const Globals& g, const std::string& key) {
    if (g.config.empty()) return {};
    const auto kv = KeyValues::load(g.config);
    const auto v = kv.get(key);
    if (!v) return {};
    return reporter::detail::resolve(fs::path(g.config).parent_path(), std::string(text::trim(*v))).string();
}

void write_out(const Globals& g, const std::string& name, const std::string& content) {
    fs::create_directories(g.out_dir);
    reporter::detail::write_file(fs::path(g.out_dir) / name, content);
    std::cerr << "wrote " << (fs::path(g.out_dir) / name).string() << '\n';
}

template <typename F>
std::string render(F&& f) {
    std::ostringstream os;
    f(os);
    return os.str();
}

// --- compose ---------------------------------------------------------------

struct ComposeArgs {
    std::string templates, threats, domain, threat;
    std::string context{kContextSlot};  // the default leaves the slot in place
};

void cmd_compose(const Globals& g, ComposeArgs a) {
    if (a.templates.empty()) a.templates = config_path(g, "corpus.templates");
    if (a.threats.empty()) a.threats = config_path(g, "corpus.threats");
    if (a.templates.empty()) throw ConfigError("--templates", "required (or corpus.templates in --config)");
    if (a.threats.empty()) throw ConfigError("--threats", "required (or corpus.threats in --config)");
    const auto templates = TemplateBank::load(a.templates);
    const auto threats = ThreatBank::load(a.threats);

    std::optional<DomainId> only_domain;
    if (!a.domain.empty() && !(only_domain = parse_domain(a.domain)))
        throw ConfigError("--domain", "unknown domain '" + a.domain + "'");
    std::optional<ThreatKind> only_threat;
    if (!a.threat.empty() && !(only_threat = parse_threat(a.threat)))
        throw ConfigError("--threat", "unknown threat '" + a.threat + "'");

    std::size_t n = 0;
    for (const auto& tpl : templates.all()) {
        if (only_domain && tpl.domain != *only_domain) continue;
        for (const auto kind : kAllThreats) {
            if (only_threat && kind != *only_threat) continue;
            const auto& tc = threats.get(kind);
            const auto p = compose_prompt(tpl, tc, a.context);
            nlohmann::ordered_json j{{"template", p.template_id},
                                     {"domain", std::string(domain_info(tpl.domain).key)},
                                     {"threat", std::string(to_string(tc.kind))},
                                     {"prompt", p.text}};
            std::cout << j.dump() << '\n';
            ++n;
        }
    }
    std::cerr << n << " prompts\n";
}

// --- collect ---------------------------------------------------------------

struct CollectArgs {
    std::string conditions, params, templates, threats;
    std::size_t n_per_cell = 1;
    std::size_t concurrency = 4;
};

struct CellSpec {
    ModelId model;
    DomainId domain;
    ThreatKind threat;
    std::string context;
};

// Tab-separated: model, domain, threat, context. '#' comments.
std::vector<CellSpec> read_conditions(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("--conditions", "no such file '" + path + "'");
    std::vector<CellSpec> out;
    std::size_t line_no = 0;
    for (const auto& raw : text::split(text::read_file(path), '\n')) {
        ++line_no;
        const auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto f = text::split(line, '\t');
        if (f.size() < 4 || text::trim(f[3]).empty())
            throw ParseError("expected model, domain, threat, context", line_no);
        const auto d = parse_domain(text::trim(f[1]));
        if (!d) throw ParseError("unknown domain '" + f[1] + "'", line_no);
        const auto t = parse_threat(text::trim(f[2]));
        if (!t) throw ParseError("unknown threat '" + f[2] + "'", line_no);
        out.push_back({parse_model(f[0]), *d, *t, std::string(text::trim(f[3]))});
    }
    if (out.empty()) throw ConfigError("--conditions", "no conditions listed");
    return out;
}

int cmd_collect(const Globals& g, CollectArgs a) {
    if (g.config.empty()) throw ConfigError("--config", "required");
    if (a.n_per_cell == 0) throw ConfigError("--n-per-cell", "must be positive");
    if (a.templates.empty()) a.templates = config_path(g, "corpus.templates");
    if (a.threats.empty()) a.threats = config_path(g, "corpus.threats");
    if (a.templates.empty()) throw ConfigError("--templates", "required (or corpus.templates in --config)");
    if (a.threats.empty()) throw ConfigError("--threats", "required (or corpus.threats in --config)");

    const auto kv = KeyValues::load(g.config);
    const auto params = a.params.empty() ? SamplingParams{} : params_from(read_kv(a.params, "--params"));
    validate(params);
    const auto templates = TemplateBank::load(a.templates);
    const auto threats = ThreatBank::load(a.threats);
    const auto cells = read_conditions(a.conditions);

    // Jobs grouped per model; templates of a domain are used in turn.
    std::map<ModelId, std::vector<CollectJob>> jobs;
    for (const auto& c : cells) {
        const auto tpls = templates.for_domain(c.domain);
        if (tpls.empty())
            throw DomainError("no template for domain '" + std::string(domain_info(c.domain).key) + "'");
        for (std::size_t i = 0; i < a.n_per_cell; ++i)
            jobs[c.model].push_back({compose_prompt(tpls[i % tpls.size()], threats.get(c.threat), c.context), c.model, params});
    }

    // Every provider is configured before the first request goes out.
    std::map<ModelId, HttpProviderConfig> providers;
    for (const auto& [model, list] : jobs) providers.emplace(model, provider_config(kv, detail::alnum_lower(model.name())));

    fs::create_directories(g.out_dir);
    RecordStore store(fs::path(g.out_dir) / "store.jsonl");
    std::size_t ok = 0, failed = 0;
    for (const auto& [model, list] : jobs) {
        const std::string name = detail::alnum_lower(model.name());
        HttpProvider provider(providers.at(model));
        RateLimiter limiter(kv.get_double("provider." + name + ".rate", 1.0),
                            static_cast<std::size_t>(kv.get_int("provider." + name + ".burst", 1)));
        Collector collector(provider, store, limiter, RetryPolicy{}, g.seed.value_or(0));
        for (const auto& o : collector.collect_all(list, a.concurrency)) {
            if (o.record) {
                ++ok;
            } else {
                ++failed;
                std::cerr << model.name() << ": " << o.error << '\n';
            }
        }
    }
    std::cout << "collected " << ok << ", failed " << failed << ", store " << store.path().string() << '\n';
    return failed ? 1 : 0;
}

// --- import / qc -------------------------------------------------------------

void cmd_import(const Globals& g, const std::string& path, const std::string& mapping) {
    if (!fs::exists(path)) throw ConfigError("--path", "no such file '" + path + "'");
    const auto m = mapping.empty() ? FieldMapping{} : FieldMapping::load(mapping);
    const auto records = read_dataset(path, m);
    fs::create_directories(g.out_dir);
    const auto out = fs::path(g.out_dir) / "store.jsonl";
    export_records(out, records);
    std::cout << "imported " << records.size() << " records into " << out.string() << '\n';
}

void cmd_qc(const Globals& g, const std::string& input) {
    const auto cfg = pipeline_config(g, input);
    const auto in = reporter::ingest_and_qc(cfg);
    write_out(g, "qc_report.json", to_json(in.qc).dump(2) + "\n");
    write_out(g, "qc_records.jsonl", render([&](std::ostream& os) {
                  for (const auto& r : in.records) os << to_line(r) << '\n';
              }));
    std::cout << "records " << in.qc.total << ", valid " << in.qc.valid << ", review sample "
              << in.qc.sample_ids.size();
    if (in.corrupt_lines) std::cout << ", corrupt lines skipped " << in.corrupt_lines;
    std::cout << '\n';
}

// --- measure / analyze / classify -----------------------------------------

struct Staged {
    reporter::Ingested ingested;
    std::vector<statlab::ScoredResponse> scored;
};

Staged measure(const reporter::PipelineConfig& cfg) {
    Staged s;
    s.ingested = reporter::ingest_and_qc(cfg);
    const auto scorer = reporter::make_scorer(cfg);
    s.scored = reporter::score_records(scorer, s.ingested.records, cfg.threads);
    return s;
}

void cmd_measure(const Globals& g, const std::string& input) {
    const auto s = measure(pipeline_config(g, input));
    write_out(g, "metrics.csv", render([&](std::ostream& os) { reporter::write_metrics_csv(os, s.scored); }));
    std::cout << "scored " << s.scored.size() << " responses\n";
}

statlab::Analysis analyze(const reporter::PipelineConfig& cfg) { return statlab::analyze(measure(cfg).scored); }

void cmd_analyze(const Globals& g, const std::string& input) {
    const auto a = analyze(pipeline_config(g, input));
    write_out(g, "effects.csv", render([&](std::ostream& os) { statlab::write_effects_csv(os, a.effects); }));
    write_out(g, "skipped_cells.csv", render([&](std::ostream& os) { statlab::write_skipped_csv(os, a.skipped); }));
    std::cout << "effects " << a.effects.size() << ", skipped cells " << a.skipped.size() << '\n';
}

void cmd_classify(const Globals& g, const std::string& input) {
    const auto cfg = pipeline_config(g, input);
    const auto c = verdict::classify_all(analyze(cfg).effects, cfg.polarity, cfg.thresholds);
    write_out(g, "classified.csv", render([&](std::ostream& os) { verdict::write_classified_csv(os, c.classified); }));
    write_out(g, "unclassifiable.csv",
              render([&](std::ostream& os) { statlab::write_effects_csv(os, c.unclassifiable); }));
    for (const auto& [label, n] : verdict::label_counts(c.classified))
        std::cout << verdict::to_string(label) << ' ' << n << '\n';
}

void cmd_report(const Globals& g, const std::string& input) {
    const auto cfg = pipeline_config(g, input);
    const auto b = reporter::run_pipeline(cfg, g.out_dir);
    std::cout << "report written to " << g.out_dir << " (" << b.manifest["files"].size() + 1 << " files, "
              << b.analysis.effects.size() << " effects)\n";
}

// --- power -----------------------------------------------------------------

struct PowerArgs {
    double sigma = 1.5, delta = 0.5, alpha = 0.05, beta = 0.2;
    std::vector<std::size_t> n;
    double effect = 0.5;
};

void cmd_power(const PowerArgs& a) {
    std::cout << "required n per group: " << statlab::required_n(a.sigma, a.delta, a.alpha, a.beta) << " (sigma "
              << a.sigma << ", delta " << a.delta << ", alpha " << a.alpha << ", power " << 1.0 - a.beta << ")\n";
    if (!a.n.empty()) {
        if (a.n.size() != 2) throw ConfigError("--n", "expects two group sizes");
        const double p = statlab::achieved_power(a.n[0], a.n[1], a.effect, a.alpha);
        std::cout << "achieved power: " << text::format_fixed(p, 6) << " (n " << a.n[0] << " vs " << a.n[1]
                  << ", d " << a.effect << ")\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"threatbench: threat-framing robustness experiments for language models"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "pipeline config (key = value)");
    app.add_option("--seed", g.seed, "override the config seed");
    app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

    ComposeArgs compose;
    auto* c_compose = app.add_subcommand("compose", "print composed prompts as JSON lines");
    c_compose->add_option("--templates", compose.templates, "template file");
    c_compose->add_option("--threats", compose.threats, "threat framing file");
    c_compose->add_option("--context", compose.context, "text for the {context} slot");
    c_compose->add_option("--domain", compose.domain, "only this domain");
    c_compose->add_option("--threat", compose.threat, "only this threat kind");

    CollectArgs collect;
    auto* c_collect = app.add_subcommand("collect", "query providers and append to <out-dir>/store.jsonl");
    c_collect->add_option("--conditions", collect.conditions, "cells: model, domain, threat, context")->required();
    c_collect->add_option("--n-per-cell", collect.n_per_cell, "prompts per cell")->capture_default_str();
    c_collect->add_option("--params", collect.params, "sampling parameters file");
    c_collect->add_option("--concurrency", collect.concurrency, "requests in flight per provider")->capture_default_str();
    c_collect->add_option("--templates", collect.templates, "template file");
    c_collect->add_option("--threats", collect.threats, "threat framing file");

    std::string import_path, import_mapping;
    auto* c_import = app.add_subcommand("import", "convert a dataset into <out-dir>/store.jsonl");
    c_import->add_option("--path", import_path, "dataset (.jsonl, .json, .csv, .tsv)")->required();
    c_import->add_option("--mapping", import_mapping, "field mapping file");

    std::string input;
    auto* c_qc = app.add_subcommand("qc", "validity, dedupe and review sample");
    auto* c_measure = app.add_subcommand("measure", "score the eleven metrics");
    auto* c_analyze = app.add_subcommand("analyze", "per-cell tests with FDR correction");
    auto* c_classify = app.add_subcommand("classify", "label effects");
    auto* c_report = app.add_subcommand("report", "full pipeline into <out-dir>");
    for (auto* sc : {c_qc, c_measure, c_analyze, c_classify, c_report})
        sc->add_option("--input", input, "record store to use instead of data.path");
    c_qc->add_option("--seed", g.seed, "review sample seed");

    PowerArgs power;
    auto* c_power = app.add_subcommand("power", "sample size and achieved power");
    c_power->add_option("--sigma", power.sigma)->capture_default_str();
    c_power->add_option("--delta", power.delta)->capture_default_str();
    c_power->add_option("--alpha", power.alpha)->capture_default_str();
    c_power->add_option("--beta", power.beta, "type II error rate")->capture_default_str();
    c_power->add_option("--n", power.n, "two group sizes for achieved power")->expected(2);
    c_power->add_option("--effect", power.effect, "standardized effect for achieved power")->capture_default_str();

    for (auto* sc : app.get_subcommands({})) sc->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*c_compose) cmd_compose(g, compose);
        else if (*c_collect) return cmd_collect(g, collect);
        else if (*c_import) cmd_import(g, import_path, import_mapping);
        else if (*c_qc) cmd_qc(g, input);
        else if (*c_measure) cmd_measure(g, input);
        else if (*c_analyze) cmd_analyze(g, input);
        else if (*c_classify) cmd_classify(g, input);
        else if (*c_report) cmd_report(g, input);
        else if (*c_power) cmd_power(power);
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.stage() << ": " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
