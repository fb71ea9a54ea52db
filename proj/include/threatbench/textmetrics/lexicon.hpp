#pragma once

// Category lexicons and the two scores built on them: the per-token
// membership ratio and the per-character pattern ratio.

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "threatbench/error.hpp"
#include "threatbench/text.hpp"
#include "threatbench/textmetrics/tokenize.hpp"

namespace threatbench::textmetrics {

enum class LexiconCategory { analytical, certainty, defensive, formal };

inline std::string_view to_string(LexiconCategory c) {
    switch (c) {
        case LexiconCategory::analytical: return "analytical";
        case LexiconCategory::certainty: return "certainty";
        case LexiconCategory::defensive: return "defensive";
        case LexiconCategory::formal: return "formal";
    }
    return "?";
}

// A word or phrase as a token sequence. A trailing '*' in the source term
// makes the last token a prefix match ("certain*" matches "certainly").
struct Pattern {
    std::vector<std::string> tokens;
    bool prefix_last = false;

    bool matches_token(std::size_t k, std::string_view tok) const {
        if (prefix_last && k + 1 == tokens.size()) return tok.substr(0, tokens[k].size()) == tokens[k];
        return tok == tokens[k];
    }

    friend auto operator<=>(const Pattern&, const Pattern&) = default;
};

class Lexicon {
public:
    Lexicon(LexiconCategory category, const std::vector<std::string>& terms) : category_(category) {
        std::set<Pattern> seen;
        for (const auto& term : terms) {
            auto t = text::trim(term);
            if (t.empty()) continue;
            Pattern p;
            if (t.back() == '*') {
                p.prefix_last = true;
                t.remove_suffix(1);
            }
            p.tokens = tokenize(t);
            if (p.tokens.empty()) continue;
            if (seen.insert(p).second) patterns_.push_back(std::move(p));
        }
        if (patterns_.empty()) throw DomainError("lexicon '" + std::string(to_string(category)) + "' is empty");
        for (std::size_t i = 0; i < patterns_.size(); ++i) {
            const auto& p = patterns_[i];
            if (p.prefix_last && p.tokens.size() == 1) prefix_first_.push_back(i);
            else by_first_[p.tokens.front()].push_back(i);
        }
    }

    // One term per line; '#' starts a comment line.
    static Lexicon load(LexiconCategory category, const std::string& path) {
        std::vector<std::string> terms;
        for (const auto& raw : text::split(text::read_file(path), '\n')) {
            const auto line = text::trim(raw);
            if (!line.empty() && line.front() != '#') terms.emplace_back(line);
        }
        return Lexicon(category, terms);
    }

    LexiconCategory category() const noexcept { return category_; }
    const std::vector<Pattern>& patterns() const noexcept { return patterns_; }

    // Single-token membership, used by the token-ratio score.
    bool contains_token(std::string_view tok) const {
        if (const auto it = by_first_.find(std::string(tok)); it != by_first_.end())
            for (auto i : it->second)
                if (patterns_[i].tokens.size() == 1) return true;
        for (auto i : prefix_first_)
            if (patterns_[i].matches_token(0, tok)) return true;
        return false;
    }

    // Occurrences of every pattern at every start position; overlapping and
    // nested matches all count.
    std::size_t count_matches(const std::vector<std::string>& tokens) const {
        std::size_t n = 0;
        const auto try_pattern = [&](const Pattern& p, std::size_t start) {
            if (start + p.tokens.size() > tokens.size()) return;
            for (std::size_t k = 0; k < p.tokens.size(); ++k)
                if (!p.matches_token(k, tokens[start + k])) return;
            ++n;
        };
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (const auto it = by_first_.find(tokens[i]); it != by_first_.end())
                for (auto idx : it->second) try_pattern(patterns_[idx], i);
            for (auto idx : prefix_first_) try_pattern(patterns_[idx], i);
        }
        return n;
    }

private:
    LexiconCategory category_;
    std::vector<Pattern> patterns_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_first_;
    std::vector<std::size_t> prefix_first_;
};

// Share of tokens that belong to the lexicon.
inline double lexicon_score(const std::vector<std::string>& tokens, const Lexicon& lexicon) {
    if (tokens.empty()) throw UndefinedScore("lexicon score of an empty token list");
    std::size_t hits = 0;
    for (const auto& t : tokens)
        if (lexicon.contains_token(t)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(tokens.size());
}

// Whole-word, case-insensitive pattern matches per character of text.
inline double pattern_ratio(std::string_view raw, const Lexicon& lexicon) {
    const auto s = text::trim(raw);
    const auto chars = text::code_point_count(s);
    if (chars == 0) throw UndefinedScore("pattern ratio of an empty text");
    return static_cast<double>(lexicon.count_matches(tokenize(s))) / static_cast<double>(chars);
}

}  // namespace threatbench::textmetrics
