#pragma once

// End-to-end run: ingest, QC, metrics, statistics with FDR, classification,
// tables. Outputs land in a staging directory that replaces the target only
// once every stage has succeeded.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "threatbench/error.hpp"
#include "threatbench/gateway.hpp"
#include "threatbench/hash.hpp"
#include "threatbench/reporter/config.hpp"
#include "threatbench/reporter/render.hpp"
#include "threatbench/reporter/tables.hpp"
#include "threatbench/statlab.hpp"
#include "threatbench/textmetrics.hpp"
#include "threatbench/textmetrics/remote_similarity.hpp"
#include "threatbench/verdict.hpp"

namespace threatbench::reporter {

struct Ingested {
    std::vector<ResponseRecord> records;  // after QC
    QualityReport qc;
    std::size_t corrupt_lines = 0;  // store reads only
};

struct ReportBundle {
    Ingested ingested;
    std::vector<statlab::ScoredResponse> scored;
    statlab::Analysis analysis;
    verdict::Classification classification;
    std::vector<DomainProfileRow> domain_profile;
    std::vector<MetricEnhancementRow> metric_enhancement;
    std::vector<TierRow> tiers;
    std::vector<ModelRow> models;
    std::vector<ThreatRow> threats;
    std::optional<verdict::Correlation> correlation;
    verdict::ConditionRate role_enhancement;
    nlohmann::ordered_json summary;
    nlohmann::ordered_json manifest;
};

// Everything metric scoring needs, loaded once from the configuration.
struct Scorer {
    textmetrics::LexiconSet lexicons;
    textmetrics::ReferenceSet references;
    std::unique_ptr<textmetrics::SimilarityProvider> provider;
    textmetrics::Aggregation aggregation;

    textmetrics::MetricContext context() const { return {lexicons, references, *provider, aggregation}; }
};

inline Scorer make_scorer(const PipelineConfig& cfg) {
    using textmetrics::Lexicon;
    using textmetrics::LexiconCategory;
    Scorer s{{Lexicon::load(LexiconCategory::analytical, cfg.lexicon_analytical.string()),
              Lexicon::load(LexiconCategory::certainty, cfg.lexicon_certainty.string()),
              Lexicon::load(LexiconCategory::defensive, cfg.lexicon_defensive.string()),
              Lexicon::load(LexiconCategory::formal, cfg.lexicon_formal.string())},
             textmetrics::ReferenceSet::load(cfg.references_path.string()),
             nullptr,
             cfg.aggregation};
    if (cfg.remote_similarity) {
        textmetrics::RemoteSimilarityConfig rc;
        rc.base_url = cfg.similarity_url;
        if (!cfg.similarity_token_env.empty())
            if (const char* tok = std::getenv(cfg.similarity_token_env.c_str())) rc.token = tok;
        s.provider = std::make_unique<textmetrics::RemoteSimilarity>(rc);
    } else {
        s.provider = std::make_unique<textmetrics::LexicalSimilarity>(s.references.all_passages());
    }
    return s;
}

inline QcOptions qc_options(const PipelineConfig& cfg) {
    QcOptions o;
    o.min_chars = cfg.min_chars;
    if (cfg.blocklist_path) o.blocklist = load_blocklist(cfg.blocklist_path->string());
    return o;
}

inline std::vector<ResponseRecord> read_source(const PipelineConfig& cfg, std::size_t* corrupt_lines = nullptr) {
    if (cfg.data_kind == DataKind::store) {
        auto loaded = load_records(cfg.data_path);
        if (corrupt_lines) *corrupt_lines = loaded.corrupt_lines;
        return std::move(loaded.records);
    }
    const auto mapping = cfg.mapping_path ? FieldMapping::load(cfg.mapping_path->string()) : FieldMapping{};
    return read_dataset(cfg.data_path, mapping);
}

inline std::vector<statlab::ScoredResponse> score_records(const Scorer& scorer, const std::vector<ResponseRecord>& records,
                                                          std::size_t threads) {
    const auto vectors = textmetrics::score_all(
        records, scorer.context(), [](const ResponseRecord& r) -> const std::string& { return r.response; },
        [](const ResponseRecord& r) { return r.condition.domain; }, threads);
    std::vector<statlab::ScoredResponse> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) out.push_back({records[i].id, records[i].condition, vectors[i]});
    return out;
}

namespace detail {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

inline nlohmann::ordered_json rate_json(const verdict::ConditionRate& r) {
    nlohmann::ordered_json j;
    j["conditions"] = r.conditions;
    j["hits"] = r.hits;
    j["rate"] = r.rate ? nlohmann::ordered_json(*r.rate) : nlohmann::ordered_json(nullptr);
    return j;
}

inline nlohmann::ordered_json build_summary(const ReportBundle& b, const PipelineConfig& cfg) {
    nlohmann::ordered_json j;
    j["records_total"] = b.ingested.qc.total;
    j["records_valid"] = b.ingested.qc.valid;
    j["effects_tested"] = b.analysis.effects.size();
    j["cells_skipped"] = b.analysis.skipped.size();
    j["effects_unclassifiable"] = b.classification.unclassifiable.size();
    nlohmann::ordered_json labels;
    for (const auto& [label, n] : verdict::label_counts(b.classification.classified))
        labels[std::string(verdict::to_string(label))] = n;
    j["labels"] = labels;
    j["role_enhancement_rate"] = rate_json(b.role_enhancement);
    nlohmann::ordered_json tiers;
    for (const auto& [tier, tr] : verdict::positive_effect_distribution(b.classification.classified)) {
        auto t = rate_json(tr.rate);
        if (!tr.note.empty()) t["note"] = tr.note;
        tiers[std::string(to_string(tier))] = t;
    }
    j["positive_effect_distribution"] = tiers;
    std::size_t instances = 0;
    for (const auto& t : b.tiers) instances += t.response_instances;
    j["positive_response_instances"] = instances;
    if (b.correlation) {
        j["vulnerability_enhancement_correlation"] = {
            {"r", b.correlation->r}, {"p", b.correlation->p}, {"conditions", b.correlation->conditions}};
    } else {
        j["vulnerability_enhancement_correlation"] = nullptr;
    }
    auto ranked = b.domain_profile;
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
        return x.vulnerability_rate > y.vulnerability_rate;
    });
    nlohmann::ordered_json rank = nlohmann::ordered_json::array();
    for (const auto& r : ranked)
        rank.push_back({{"domain", domain_info(r.domain).key}, {"vulnerability_rate", r.vulnerability_rate},
                        {"enhancement_rate", r.enhancement_rate}});
    j["domains_by_vulnerability"] = rank;
    j["profile_denominator"] = to_string(cfg.denominator);
    return j;
}

inline void write_report_text(std::ostream& os, const ReportBundle& b, const PipelineConfig& cfg) {
    const auto section = [&os](const std::string& title) { os << '\n' << title << '\n' << std::string(title.size(), '=') << '\n'; };
    os << "threatbench report\n";
    os << "records: " << b.ingested.qc.total << " read, " << b.ingested.qc.valid << " after QC\n";
    os << "effects tested: " << b.analysis.effects.size() << ", skipped cells: " << b.analysis.skipped.size()
       << ", unclassifiable: " << b.classification.unclassifiable.size() << '\n';
    for (const auto& [label, n] : verdict::label_counts(b.classification.classified))
        os << "  " << verdict::to_string(label) << ": " << n << '\n';

    section("Domain vulnerability and enhancement profile (rates per " + std::string(to_string(cfg.denominator)) + ")");
    domain_profile_table(b.domain_profile, cfg.denominator).write_text(os);
    section("Maximum enhancement by metric");
    metric_enhancement_text(b.metric_enhancement).write_text(os);
    os << "\xe2\x80\xa0 trend level: " << text::format_number(cfg.thresholds.alpha, 6) << " <= p_fdr < "
       << text::format_number(cfg.trend, 6) << '\n';
    section("Enhancement distribution by complexity tier");
    tier_distribution_table(b.tiers).write_text(os);
    os << "Response instances: threat responses in conditions with at least one enhancement.\n";
    os << "Condition rate: share of conditions with at least one enhancement.\n";
    section("Vulnerability and enhancement by complexity tier");
    tier_summary_table(b.tiers).write_text(os);
    section("Model enhancement profiles");
    model_profile_table(b.models).write_text(os);
    section("Threat mechanisms");
    threat_profile_table(b.threats).write_text(os);
    section("Dual effects");
    os << "role enhancement rate: "
       << (b.role_enhancement.rate ? text::format_fixed(*b.role_enhancement.rate, 3) : std::string("n/a")) << " ("
       << b.role_enhancement.hits << " of " << b.role_enhancement.conditions << " role conditions)\n";
    if (b.correlation)
        os << "vulnerability-enhancement correlation: r = " << text::format_fixed(b.correlation->r, 3)
           << ", p = " << p_text(b.correlation->p) << " over " << b.correlation->conditions << " conditions\n";
    else
        os << "vulnerability-enhancement correlation: undefined (fewer than two conditions with both sides)\n";
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw Error("write failed for '" + p.string() + "'");
}

template <typename F>
std::string render(F&& f) {
    std::ostringstream ss;
    f(ss);
    return ss.str();
}

}  // namespace detail

inline Ingested ingest_and_qc(const PipelineConfig& cfg) {
    Ingested in;
    auto records = detail::stage("ingest", [&] { return read_source(cfg, &in.corrupt_lines); });
    auto qc = detail::stage("qc", [&] { return run_qc(std::move(records), qc_options(cfg), cfg.seed); });
    in.records = std::move(qc.records);
    in.qc = std::move(qc.report);
    return in;
}

// Runs every stage in memory; nothing is written.
inline ReportBundle build_report(const PipelineConfig& cfg) {
    ReportBundle b;
    b.ingested = ingest_and_qc(cfg);
    b.scored = detail::stage("metrics", [&] {
        const auto scorer = make_scorer(cfg);
        return score_records(scorer, b.ingested.records, cfg.threads);
    });
    b.analysis = detail::stage("stats", [&] { return statlab::analyze(b.scored); });
    b.classification = detail::stage("classify", [&] {
        return verdict::classify_all(b.analysis.effects, cfg.polarity, cfg.thresholds);
    });
    detail::stage("tables", [&] {
        const auto& cl = b.classification.classified;
        b.domain_profile = domain_profile(cl, cfg.denominator);
        b.metric_enhancement = metric_enhancement_table(cl, cfg.thresholds, cfg.trend);
        b.tiers = tier_table(cl, cfg.denominator);
        b.models = model_table(cl);
        b.threats = threat_table(cl);
        b.correlation = verdict::vulnerability_enhancement_correlation(cl, cfg.polarity);
        b.role_enhancement =
            verdict::enhancement_rate(cl, [](const ExperimentCondition& c) { return c.threat == ThreatKind::role; });
        b.summary = detail::build_summary(b, cfg);
        return 0;
    });
    return b;
}

// Renders every output file of a bundle, keyed by file name.
inline std::map<std::string, std::string> render_bundle(const ReportBundle& b, const PipelineConfig& cfg) {
    using detail::render;
    std::map<std::string, std::string> files;
    files["qc_report.json"] = to_json(b.ingested.qc).dump(2) + "\n";
    files["review_sample.csv"] = render([&](std::ostream& os) {
        os << "id,model,domain,threat,response\n";
        std::unordered_set<std::string> wanted(b.ingested.qc.sample_ids.begin(), b.ingested.qc.sample_ids.end());
        for (const auto& r : b.ingested.records)
            if (wanted.count(r.id))
                os << statlab::detail::join_csv({r.id, r.condition.model.name(),
                                                 std::string(domain_info(r.condition.domain).key),
                                                 std::string(to_string(r.condition.threat)), r.response})
                   << '\n';
    });
    files["metrics.csv"] = render([&](std::ostream& os) { write_metrics_csv(os, b.scored); });
    files["effects.csv"] = render([&](std::ostream& os) { statlab::write_effects_csv(os, b.analysis.effects); });
    files["skipped_cells.csv"] = render([&](std::ostream& os) { statlab::write_skipped_csv(os, b.analysis.skipped); });
    files["classified.csv"] =
        render([&](std::ostream& os) { verdict::write_classified_csv(os, b.classification.classified); });
    files["unclassifiable.csv"] =
        render([&](std::ostream& os) { statlab::write_effects_csv(os, b.classification.unclassifiable); });
    files["domain_profile.csv"] =
        render([&](std::ostream& os) { domain_profile_table(b.domain_profile, cfg.denominator).write_csv(os); });
    files["metric_enhancement.csv"] =
        render([&](std::ostream& os) { metric_enhancement_text(b.metric_enhancement).write_csv(os); });
    files["tier_distribution.csv"] = render([&](std::ostream& os) { tier_distribution_table(b.tiers).write_csv(os); });
    files["tier_summary.csv"] = render([&](std::ostream& os) { tier_summary_table(b.tiers).write_csv(os); });
    files["model_profile.csv"] = render([&](std::ostream& os) { model_profile_table(b.models).write_csv(os); });
    files["threat_profile.csv"] = render([&](std::ostream& os) { threat_profile_table(b.threats).write_csv(os); });
    files["summary.json"] = b.summary.dump(2) + "\n";
    files["report.txt"] = render([&](std::ostream& os) { detail::write_report_text(os, b, cfg); });
    return files;
}

inline nlohmann::ordered_json build_manifest(const ReportBundle& b, const PipelineConfig& cfg,
                                             const std::map<std::string, std::string>& files) {
    nlohmann::ordered_json m;
    m["config_sha256"] = sha256_hex(cfg.raw.canonical());
    m["data_file"] = cfg.data_path.filename().string();
    m["data_sha256"] = sha256_hex(text::read_file(cfg.data_path.string()));
    m["seed"] = cfg.seed;
    m["records_total"] = b.ingested.qc.total;
    m["records_valid"] = b.ingested.qc.valid;
    m["corrupt_lines"] = b.ingested.corrupt_lines;
    m["effects_tested"] = b.analysis.effects.size();
    m["cells_skipped"] = b.analysis.skipped.size();
    m["similarity_provider"] = cfg.remote_similarity ? "remote" : "lexical";
    nlohmann::ordered_json f;
    for (const auto& [name, content] : files) f[name] = sha256_hex(content);
    m["files"] = f;
    return m;
}

// Builds the report and writes it to `out_dir`. The directory is replaced
// only after every stage succeeds; on failure no partial output remains.
inline ReportBundle run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    const fs::path staging = out_dir.string() + ".partial";
    fs::remove_all(staging);
    try {
        auto b = build_report(cfg);
        detail::stage("write", [&] {
            auto files = render_bundle(b, cfg);
            b.manifest = build_manifest(b, cfg, files);
            files["manifest.json"] = b.manifest.dump(2) + "\n";
            fs::create_directories(staging);
            for (const auto& [name, content] : files) detail::write_file(staging / name, content);
            fs::remove_all(out_dir);
            if (out_dir.has_parent_path()) fs::create_directories(out_dir.parent_path());
            fs::rename(staging, out_dir);
            return 0;
        });
        return b;
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
}

}  // namespace threatbench::reporter
