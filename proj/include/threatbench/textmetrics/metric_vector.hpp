#pragma once

// The eleven per-response metrics and their composition.

#include <algorithm>
#include <array>
#include <atomic>
#include <bitset>
#include <exception>
#include <mutex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_set>
#include <vector>

#include "threatbench/corpus.hpp"
#include "threatbench/error.hpp"
#include "threatbench/text.hpp"
#include "threatbench/textmetrics/lexicon.hpp"
#include "threatbench/textmetrics/readability.hpp"
#include "threatbench/textmetrics/similarity.hpp"
#include "threatbench/textmetrics/tokenize.hpp"

namespace threatbench {

enum class MetricId {
    length,
    words,
    sentences,
    analytical,
    certainty,
    complexity,
    appropriateness,
    defensive,
    formal,
    diversity,
    avg_sentence_len,
};

inline constexpr std::size_t kMetricCount = 11;

inline constexpr std::array<MetricId, kMetricCount> kAllMetrics{
    MetricId::length,    MetricId::words,           MetricId::sentences, MetricId::analytical,
    MetricId::certainty, MetricId::complexity,      MetricId::appropriateness, MetricId::defensive,
    MetricId::formal,    MetricId::diversity,       MetricId::avg_sentence_len};

inline std::string_view to_string(MetricId m) {
    static constexpr std::array<std::string_view, kMetricCount> keys{
        "length", "words", "sentences", "analytical", "certainty", "complexity",
        "appropriateness", "defensive", "formal", "diversity", "avg_sentence_len"};
    return keys[static_cast<std::size_t>(m)];
}

inline std::string_view display_name(MetricId m) {
    static constexpr std::array<std::string_view, kMetricCount> names{
        "Response Length", "Word Count",         "Sentence Count",    "Analytical Depth",
        "Certainty Score", "Complexity Score",   "Domain Appropriateness", "Defensive Language",
        "Formal Language", "Lexical Diversity",  "Avg. Sentence Length"};
    return names[static_cast<std::size_t>(m)];
}

inline std::optional<MetricId> parse_metric(std::string_view s) {
    for (auto m : kAllMetrics)
        if (s == to_string(m)) return m;
    return std::nullopt;
}

// Values for one response. `defined` marks which entries carry a value; a
// metric whose input is degenerate (no tokens, empty text) stays unset.
struct MetricVector {
    std::size_t length_chars = 0;
    std::size_t words = 0;
    std::size_t sentences = 0;
    double analytical = 0.0;
    double certainty = 0.0;
    double complexity = 0.0;
    double appropriateness = 0.0;
    double defensive = 0.0;
    double formal = 0.0;
    double diversity = 0.0;
    double avg_sentence_len = 0.0;
    std::bitset<kMetricCount> defined;

    bool has(MetricId m) const { return defined.test(static_cast<std::size_t>(m)); }

    double value(MetricId m) const {
        switch (m) {
            case MetricId::length: return static_cast<double>(length_chars);
            case MetricId::words: return static_cast<double>(words);
            case MetricId::sentences: return static_cast<double>(sentences);
            case MetricId::analytical: return analytical;
            case MetricId::certainty: return certainty;
            case MetricId::complexity: return complexity;
            case MetricId::appropriateness: return appropriateness;
            case MetricId::defensive: return defensive;
            case MetricId::formal: return formal;
            case MetricId::diversity: return diversity;
            case MetricId::avg_sentence_len: return avg_sentence_len;
        }
        return 0.0;
    }

    bool complete() const { return defined.all(); }
};

namespace textmetrics {

struct Structural {
    std::size_t length_chars = 0;
    std::size_t words = 0;
    std::size_t sentences = 0;
};

inline Structural structural(std::string_view s) {
    return {text::code_point_count(s), tokenize(s).size(), split_sentences(s).size()};
}

// Type-token ratio over lowercased tokens.
inline double diversity(const std::vector<std::string>& tokens) {
    if (tokens.empty()) throw UndefinedScore("diversity of an empty token list");
    const std::unordered_set<std::string> unique(tokens.begin(), tokens.end());
    return static_cast<double>(unique.size()) / static_cast<double>(tokens.size());
}

inline double avg_sentence_length(std::size_t words, std::size_t sentences) {
    if (sentences == 0) throw UndefinedScore("average sentence length with no sentences");
    return static_cast<double>(words) / static_cast<double>(sentences);
}

struct LexiconSet {
    Lexicon analytical;
    Lexicon certainty;
    Lexicon defensive;
    Lexicon formal;
};

// Everything scoring needs besides the text itself.
struct MetricContext {
    const LexiconSet& lexicons;
    const ReferenceSet& references;
    SimilarityProvider& provider;
    Aggregation aggregation = Aggregation::max;
};

// Scoring runs on the text with surrounding whitespace removed.
inline MetricVector metric_vector(std::string_view raw, DomainId domain, const MetricContext& ctx) {
    const auto s = text::trim(raw);
    MetricVector v;
    const auto set = [&v](MetricId m) { v.defined.set(static_cast<std::size_t>(m)); };

    const auto tokens = tokenize(s);
    const auto sentences = split_sentences(s);
    v.length_chars = text::code_point_count(s);
    v.words = tokens.size();
    v.sentences = sentences.size();
    set(MetricId::length);
    set(MetricId::words);
    set(MetricId::sentences);

    if (!tokens.empty()) {
        v.analytical = lexicon_score(tokens, ctx.lexicons.analytical);
        v.certainty = lexicon_score(tokens, ctx.lexicons.certainty);
        set(MetricId::analytical);
        set(MetricId::certainty);
        std::size_t syllables = 0;
        for (const auto& t : tokens) syllables += static_cast<std::size_t>(count_syllables(t));
        v.complexity = flesch_kincaid(ReadabilityCounts{tokens.size(), sentences.size(), syllables});
        set(MetricId::complexity);
        v.diversity = diversity(tokens);
        set(MetricId::diversity);
        v.avg_sentence_len = avg_sentence_length(v.words, v.sentences);
        set(MetricId::avg_sentence_len);
    }
    if (v.length_chars > 0) {
        const double chars = static_cast<double>(v.length_chars);
        v.defensive = static_cast<double>(ctx.lexicons.defensive.count_matches(tokens)) / chars;
        v.formal = static_cast<double>(ctx.lexicons.formal.count_matches(tokens)) / chars;
        set(MetricId::defensive);
        set(MetricId::formal);
    }
    v.appropriateness = appropriateness(s, ctx.references.for_domain(domain), ctx.provider, ctx.aggregation);
    set(MetricId::appropriateness);
    return v;
}

// Scores texts on `threads` workers (0 = hardware concurrency). Output order
// follows input order, so results do not depend on scheduling.
template <typename Item, typename TextOf, typename DomainOf>
std::vector<MetricVector> score_all(const std::vector<Item>& items, const MetricContext& ctx, TextOf text_of,
                                    DomainOf domain_of, std::size_t threads = 0) {
    std::vector<MetricVector> out(items.size());
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<std::size_t>(threads, std::max<std::size_t>(1, items.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
            try {
                out[i] = metric_vector(text_of(items[i]), domain_of(items[i]), ctx);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = items.size();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace textmetrics
}  // namespace threatbench
