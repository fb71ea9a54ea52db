#pragma once

// Domain appropriateness: similarity of a response to per-domain reference
// passages through a pluggable provider.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "threatbench/corpus.hpp"
#include "threatbench/error.hpp"
#include "threatbench/text.hpp"
#include "threatbench/textmetrics/tokenize.hpp"

namespace threatbench::textmetrics {

struct DomainReference {
    DomainId domain;
    std::vector<std::string> passages;
};

// Reference passages for every domain. File format: tab-separated
// `domain<TAB>passage`, one passage per line, '#' comments.
class ReferenceSet {
public:
    static ReferenceSet parse(std::string_view content) {
        ReferenceSet set;
        std::size_t line_no = 0;
        for (const auto& raw : text::split(content, '\n')) {
            ++line_no;
            const auto line = text::trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto tab = line.find('\t');
            if (tab == std::string_view::npos) throw ParseError("expected domain<TAB>passage", line_no);
            const auto dom = parse_domain(line.substr(0, tab));
            if (!dom) throw ParseError("unknown domain '" + std::string(line.substr(0, tab)) + "'", line_no);
            const auto passage = text::trim(line.substr(tab + 1));
            if (passage.empty()) throw ParseError("empty passage", line_no);
            set.refs_[static_cast<std::size_t>(*dom)].emplace_back(passage);
        }
        return set;
    }

    static ReferenceSet load(const std::string& path) { return parse(text::read_file(path)); }

    DomainReference for_domain(DomainId d) const {
        return {d, refs_[static_cast<std::size_t>(d)]};
    }

    std::vector<std::string> all_passages() const {
        std::vector<std::string> out;
        for (const auto& v : refs_) out.insert(out.end(), v.begin(), v.end());
        return out;
    }

private:
    std::array<std::vector<std::string>, kDomainCount> refs_;
};

class SimilarityProvider {
public:
    virtual ~SimilarityProvider() = default;
    virtual std::string name() const = 0;
    // One score in [0, 1] per reference.
    virtual std::vector<double> similarities(std::string_view text, const std::vector<std::string>& references) = 0;
};

// Cosine similarity of TF-IDF vectors (term frequency normalized by length).
// IDF = ln((1 + N) / (1 + df)) + 1 over the bundled corpus, so unseen terms
// still carry weight and no term weight is zero.
class LexicalSimilarity final : public SimilarityProvider {
public:
    explicit LexicalSimilarity(const std::vector<std::string>& corpus) : n_docs_(corpus.size()) {
        for (const auto& doc : corpus) {
            auto toks = tokenize(doc);
            std::sort(toks.begin(), toks.end());
            toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
            for (auto& t : toks) ++df_[t];
        }
    }

    std::string name() const override { return "lexical-tfidf"; }

    double idf(const std::string& term) const {
        const auto it = df_.find(term);
        const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df)) + 1.0;
    }

    std::map<std::string, double> weights(std::string_view s) const {
        const auto toks = tokenize(s);
        std::map<std::string, double> w;
        for (const auto& t : toks) w[t] += 1.0;
        for (auto& [term, v] : w) v = (v / static_cast<double>(toks.size())) * idf(term);
        return w;
    }

    double cosine(std::string_view a, std::string_view b) const {
        const auto wa = weights(a);
        const auto wb = weights(b);
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (const auto& [t, v] : wa) {
            na += v * v;
            if (const auto it = wb.find(t); it != wb.end()) dot += v * it->second;
        }
        for (const auto& [t, v] : wb) nb += v * v;
        if (na == 0.0 || nb == 0.0) return 0.0;
        return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
    }

    std::vector<double> similarities(std::string_view s, const std::vector<std::string>& references) override {
        std::vector<double> out;
        out.reserve(references.size());
        for (const auto& r : references) out.push_back(cosine(s, r));
        return out;
    }

private:
    std::size_t n_docs_;
    std::unordered_map<std::string, std::size_t> df_;
};

enum class Aggregation { max, mean };

inline double appropriateness(std::string_view s, const DomainReference& ref, SimilarityProvider& provider,
                              Aggregation agg = Aggregation::max) {
    if (ref.passages.empty())
        throw DomainError("no reference passages for domain '" + std::string(domain_info(ref.domain).name) + "'");
    const auto scores = provider.similarities(text::trim(s), ref.passages);
    if (scores.size() != ref.passages.size()) throw Error("similarity provider returned a wrong-sized result");
    double out = 0.0;
    if (agg == Aggregation::max) {
        out = *std::max_element(scores.begin(), scores.end());
    } else {
        for (double v : scores) out += v;
        out /= static_cast<double>(scores.size());
    }
    return std::clamp(out, 0.0, 1.0);
}

}  // namespace threatbench::textmetrics
