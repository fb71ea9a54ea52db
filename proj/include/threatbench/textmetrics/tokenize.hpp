#pragma once

// Word tokens, sentence segmentation and syllable estimates.
//
// Tokens are maximal runs of letters and digits. An apostrophe or hyphen joins
// two runs into one token ("don't", "well-known", "15-20"); anywhere else it
// separates. ASCII letters are lowercased, curly apostrophes become '\''.
// Code points >= U+00C0 count as letters except the general-punctuation,
// symbol and CJK-punctuation blocks.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "threatbench/text.hpp"

namespace threatbench::textmetrics {

namespace detail {

inline bool is_word_char(char32_t c) {
    if (c < 0x80) return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (c < 0xC0 || c == 0xD7 || c == 0xF7) return false;
    if (c >= 0x2000 && c <= 0x2BFF) return false;
    if (c >= 0x3000 && c <= 0x303F) return false;
    if (c >= 0xFE00 && c <= 0xFE6F) return false;
    if (c >= 0xFF00 && c <= 0xFF20) return false;
    if (c == 0xFEFF || c == text::kReplacement) return false;
    return true;
}

inline bool is_apostrophe(char32_t c) { return c == '\'' || c == 0x2019 || c == 0x02BC; }
inline bool is_hyphen(char32_t c) { return c == '-' || c == 0x2010 || c == 0x2011; }

}  // namespace detail

inline std::vector<std::string> tokenize(std::string_view input) {
    const std::u32string cps = text::decode(input);
    std::vector<std::string> tokens;
    std::string cur;
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const char32_t c = cps[i];
        if (detail::is_word_char(c)) {
            if (c < 0x80) cur.push_back(text::ascii_lower(static_cast<char>(c)));
            else text::append_utf8(cur, c);
            continue;
        }
        const bool joiner = detail::is_apostrophe(c) || detail::is_hyphen(c);
        if (joiner && !cur.empty() && i + 1 < cps.size() && detail::is_word_char(cps[i + 1])) {
            cur.push_back(detail::is_apostrophe(c) ? '\'' : '-');
            continue;
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

inline bool is_abbreviation(std::string_view word) {
    static const std::array<std::string_view, 18> guard{
        "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs",
        "e.g", "i.e", "cf", "fig", "approx", "no", "vol", "dept", "est"};
    const std::string w = text::to_lower(word);
    for (auto g : guard)
        if (w == g) return true;
    return false;
}

namespace detail {

inline bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }
inline bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

// The word (letters and inner dots) ending right before position `end`.
inline std::string_view word_before(std::string_view s, std::size_t end) {
    std::size_t b = end;
    while (b > 0) {
        const char c = s[b - 1];
        const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
        if (!(alpha || (c == '.' && b - 1 > 0 && b < end))) break;
        --b;
    }
    return s.substr(b, end - b);
}

// "1." / "12." opening a line is a list enumerator, not a sentence end.
inline bool is_enumerator(std::string_view s, std::size_t dot, std::size_t segment_start) {
    std::size_t b = dot;
    while (b > segment_start && s[b - 1] >= '0' && s[b - 1] <= '9') --b;
    if (b == dot) return false;
    while (b > segment_start && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
    return b == segment_start || s[b - 1] == '\n';
}

}  // namespace detail

// Boundaries fall after a run of '.', '!' or '?' (plus closing quotes or
// brackets) that is followed by whitespace or the end of the text. A lone '.'
// after a guarded abbreviation or a line-leading number does not end a
// sentence. Segments without any token are dropped.
inline std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    const auto emit = [&](std::size_t end) {
        const auto seg = text::trim(s.substr(start, end - start));
        if (!tokenize(seg).empty()) out.emplace_back(seg);
        start = end;
    };
    std::size_t i = 0;
    while (i < s.size()) {
        if (!detail::is_terminator(s[i])) {
            ++i;
            continue;
        }
        const std::size_t run_begin = i;
        while (i < s.size() && detail::is_terminator(s[i])) ++i;
        const std::size_t run_end = i;
        while (i < s.size() && detail::is_closer(s[i])) ++i;
        if (i < s.size() && !text::is_space(s[i])) continue;
        if (run_end - run_begin == 1 && s[run_begin] == '.') {
            if (is_abbreviation(detail::word_before(s, run_begin))) continue;
            if (detail::is_enumerator(s, run_begin, start)) continue;
        }
        emit(i);
    }
    if (start < s.size()) emit(s.size());
    return out;
}

// Vowel groups (a, e, i, o, u, y), minus a silent final 'e' unless the word
// ends in consonant + "le"; never below 1.
inline int count_syllables(std::string_view word) {
    std::string w;
    for (char c : word) {
        const char l = text::ascii_lower(c);
        if (l >= 'a' && l <= 'z') w.push_back(l);
    }
    if (w.empty()) return 1;
    const auto vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    int groups = 0;
    bool prev = false;
    for (char c : w) {
        const bool v = vowel(c);
        if (v && !prev) ++groups;
        prev = v;
    }
    const std::size_t n = w.size();
    if (groups > 1 && w.back() == 'e') {
        const bool consonant_le = n >= 3 && w[n - 2] == 'l' && !vowel(w[n - 3]);
        if (!consonant_le) --groups;
    }
    return groups < 1 ? 1 : groups;
}

}  // namespace threatbench::textmetrics
