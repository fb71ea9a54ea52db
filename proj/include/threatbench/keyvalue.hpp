#pragma once

// Flat `key = value` files: one pair per line, '#' comments, blank lines ignored.

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "threatbench/error.hpp"
#include "threatbench/text.hpp"

namespace threatbench {

class KeyValues {
public:
    KeyValues() = default;

    static KeyValues parse(std::string_view content) {
        KeyValues kv;
        std::size_t line_no = 0;
        for (const auto& raw : text::split(content, '\n')) {
            ++line_no;
            const auto line = text::trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
            const std::string key(text::trim(line.substr(0, eq)));
            if (key.empty()) throw ParseError("empty key", line_no);
            if (kv.values_.count(key)) throw ParseError("duplicate key '" + key + "'", line_no);
            kv.values_[key] = std::string(text::trim(line.substr(eq + 1)));
        }
        return kv;
    }

    static KeyValues load(const std::string& path) { return parse(text::read_file(path)); }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string get_or(const std::string& key, std::string fallback) const {
        return get(key).value_or(std::move(fallback));
    }

    double get_double(const std::string& key, double fallback) const {
        const auto v = get(key);
        if (!v) return fallback;
        char* end = nullptr;
        errno = 0;
        const double d = std::strtod(v->c_str(), &end);
        if (v->empty() || *end != '\0' || errno == ERANGE) throw ConfigError(key, "not a number: '" + *v + "'");
        return d;
    }

    long long get_int(const std::string& key, long long fallback) const {
        const auto v = get(key);
        if (!v) return fallback;
        long long out = 0;
        const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || p != v->data() + v->size())
            throw ConfigError(key, "not an integer: '" + *v + "'");
        return out;
    }

    const std::map<std::string, std::string>& entries() const noexcept { return values_; }

    // Canonical serialization: sorted keys, one `key = value` per line.
    std::string canonical() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace threatbench
