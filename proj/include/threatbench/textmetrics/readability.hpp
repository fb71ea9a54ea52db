#pragma once

#include <cstddef>
#include <string_view>

#include "threatbench/error.hpp"
#include "threatbench/textmetrics/tokenize.hpp"

namespace threatbench::textmetrics {

struct ReadabilityCounts {
    std::size_t words = 0;
    std::size_t sentences = 0;
    std::size_t syllables = 0;
};

inline ReadabilityCounts readability_counts(std::string_view s) {
    ReadabilityCounts c;
    const auto tokens = tokenize(s);
    c.words = tokens.size();
    c.sentences = split_sentences(s).size();
    for (const auto& t : tokens) c.syllables += static_cast<std::size_t>(count_syllables(t));
    return c;
}

// Flesch-Kincaid grade level: 0.39 (words/sentences) + 11.8 (syllables/words) - 15.59.
inline double flesch_kincaid(const ReadabilityCounts& c) {
    if (c.words == 0 || c.sentences == 0) throw UndefinedScore("Flesch-Kincaid needs at least one word");
    const double w = static_cast<double>(c.words);
    return 0.39 * (w / static_cast<double>(c.sentences)) + 11.8 * (static_cast<double>(c.syllables) / w) - 15.59;
}

inline double flesch_kincaid(std::string_view s) { return flesch_kincaid(readability_counts(s)); }

}  // namespace threatbench::textmetrics
