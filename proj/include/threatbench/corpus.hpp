#pragma once

// Experimental design space: models, domains with complexity tiers, threat
// framings, the template bank and prompt composition.

#include <algorithm>
#include <array>
#include <compare>
#include <iterator>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "threatbench/error.hpp"
#include "threatbench/text.hpp"

namespace threatbench {

enum class Complexity { high, medium, low };

inline std::string_view to_string(Complexity c) {
    switch (c) {
        case Complexity::high: return "High";
        case Complexity::medium: return "Medium";
        case Complexity::low: return "Low";
    }
    return "?";
}

enum class DomainId {
    policy,
    judicial,
    medical,
    technological,
    strategic,
    creative,
    programming,
    question_answering,
    summarization,
    translation,
};

inline constexpr std::size_t kDomainCount = 10;

struct Domain {
    DomainId id;
    std::string_view key;         // stable identifier used in files
    std::string_view name;        // full display name
    std::string_view short_name;  // label used in table triples and the role fragment
    Complexity tier;
};

inline const std::array<Domain, kDomainCount>& builtin_domains() {
    static const std::array<Domain, kDomainCount> table{{
        {DomainId::policy, "policy", "Policy Evaluation", "Policy", Complexity::high},
        {DomainId::judicial, "judicial", "Judicial Reasoning", "Judicial", Complexity::high},
        {DomainId::medical, "medical", "Medical Ethics", "Medical", Complexity::high},
        {DomainId::technological, "technological", "Technological Impact", "Technological",
         Complexity::medium},
        {DomainId::strategic, "strategic", "Strategic Decision Making", "Strategic",
         Complexity::medium},
        {DomainId::creative, "creative", "Creative Writing", "Creative", Complexity::low},
        {DomainId::programming, "programming", "Programming", "Programming", Complexity::low},
        {DomainId::question_answering, "qa", "Question Answering", "Question Answering",
         Complexity::low},
        {DomainId::summarization, "summarization", "Summarization", "Summarization",
         Complexity::low},
        {DomainId::translation, "translation", "Translation", "Translation", Complexity::low},
    }};
    return table;
}

inline const Domain& domain_info(DomainId id) {
    return builtin_domains()[static_cast<std::size_t>(id)];
}

inline std::vector<DomainId> all_domains() {
    std::vector<DomainId> out;
    for (const auto& d : builtin_domains()) out.push_back(d.id);
    return out;
}

namespace detail {

inline std::string alnum_lower(std::string_view s) {
    std::string out;
    for (char c : s) {
        if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) out.push_back(c);
        else if (c >= 'A' && c <= 'Z') out.push_back(text::ascii_lower(c));
    }
    return out;
}

}  // namespace detail

// Accepts the key, either display name, and a few common spellings, ignoring
// case and punctuation.
inline std::optional<DomainId> parse_domain(std::string_view s) {
    const std::string k = detail::alnum_lower(s);
    if (k.empty()) return std::nullopt;
    for (const auto& d : builtin_domains()) {
        if (k == detail::alnum_lower(d.key) || k == detail::alnum_lower(d.name) ||
            k == detail::alnum_lower(d.short_name))
            return d.id;
    }
    static const std::array<std::pair<std::string_view, DomainId>, 14> aliases{{
        {"technology", DomainId::technological},
        {"technical", DomainId::technological},
        {"tech", DomainId::technological},
        {"strategicdecision", DomainId::strategic},
        {"strategy", DomainId::strategic},
        {"medicine", DomainId::medical},
        {"legal", DomainId::judicial},
        {"creativity", DomainId::creative},
        {"code", DomainId::programming},
        {"coding", DomainId::programming},
        {"questionanswer", DomainId::question_answering},
        {"summary", DomainId::summarization},
        {"summarize", DomainId::summarization},
        {"policyanalysis", DomainId::policy},
    }};
    for (const auto& [alias, id] : aliases)
        if (k == alias) return id;
    return std::nullopt;
}

enum class ThreatKind { control, general, humanity, authority, role, time };

inline constexpr std::array<ThreatKind, 6> kAllThreats{
    ThreatKind::control, ThreatKind::general, ThreatKind::humanity,
    ThreatKind::authority, ThreatKind::role, ThreatKind::time};

inline bool is_valid(ThreatKind k) {
    const auto v = static_cast<int>(k);
    return v >= 0 && v < static_cast<int>(kAllThreats.size());
}

inline std::string_view to_string(ThreatKind k) {
    switch (k) {
        case ThreatKind::control: return "control";
        case ThreatKind::general: return "general";
        case ThreatKind::humanity: return "humanity";
        case ThreatKind::authority: return "authority";
        case ThreatKind::role: return "role";
        case ThreatKind::time: return "time";
    }
    return "?";
}

// Title-case label used in Domain-Model-Threat triples.
inline std::string_view display_name(ThreatKind k) {
    switch (k) {
        case ThreatKind::control: return "Control";
        case ThreatKind::general: return "General";
        case ThreatKind::humanity: return "Human";
        case ThreatKind::authority: return "Authority";
        case ThreatKind::role: return "Role";
        case ThreatKind::time: return "Time";
    }
    return "?";
}

inline std::optional<ThreatKind> parse_threat(std::string_view s) {
    const std::string k = detail::alnum_lower(s);
    for (auto kind : kAllThreats)
        if (k == to_string(kind)) return kind;
    if (k == "baseline" || k == "none" || k == "neutral") return ThreatKind::control;
    if (k == "generalthreat" || k == "generic") return ThreatKind::general;
    if (k == "human" || k == "humanconsequence" || k == "humanitythreat" || k == "harm")
        return ThreatKind::humanity;
    if (k == "authoritythreat" || k == "supervisor") return ThreatKind::authority;
    if (k == "rolebased" || k == "rolethreat" || k == "expert") return ThreatKind::role;
    if (k == "timepressure" || k == "timethreat" || k == "urgent" || k == "deadline")
        return ThreatKind::time;
    return std::nullopt;
}

// Open set of model identifiers; three built-ins match the reference study.
class ModelId {
public:
    explicit ModelId(std::string name) : name_(std::string(text::trim(name))) {
        if (name_.empty()) throw DomainError("model identifier must be non-empty");
    }

    const std::string& name() const noexcept { return name_; }

    friend bool operator==(const ModelId&, const ModelId&) = default;
    friend auto operator<=>(const ModelId&, const ModelId&) = default;

private:
    std::string name_;
};

inline std::vector<ModelId> builtin_models() {
    return {ModelId("Claude"), ModelId("GPT-4"), ModelId("Gemini")};
}

// Canonicalizes spellings of the built-in models; anything else is kept verbatim.
inline ModelId parse_model(std::string_view s) {
    const std::string k = detail::alnum_lower(s);
    if (k == "claude") return ModelId("Claude");
    if (k == "gpt4") return ModelId("GPT-4");
    if (k == "gemini") return ModelId("Gemini");
    return ModelId(std::string(s));
}

struct ExperimentCondition {
    ModelId model;
    DomainId domain;
    ThreatKind threat;

    friend bool operator==(const ExperimentCondition&, const ExperimentCondition&) = default;
    friend auto operator<=>(const ExperimentCondition&, const ExperimentCondition&) = default;
};

// "Policy-Claude-Role"
inline std::string triple_label(const ExperimentCondition& c) {
    return std::string(domain_info(c.domain).short_name) + "-" + c.model.name() + "-" +
           std::string(display_name(c.threat));
}

// Cartesian product, model-major, in the order of the input lists.
inline std::vector<ExperimentCondition> enumerate_conditions(const std::vector<ModelId>& models,
                                                             const std::vector<DomainId>& domains,
                                                             const std::vector<ThreatKind>& threats) {
    if (models.empty()) throw DomainError("enumerate_conditions: no models");
    if (domains.empty()) throw DomainError("enumerate_conditions: no domains");
    if (threats.empty()) throw DomainError("enumerate_conditions: no threats");
    if (std::set<ModelId>(models.begin(), models.end()).size() != models.size() ||
        std::set<DomainId>(domains.begin(), domains.end()).size() != domains.size() ||
        std::set<ThreatKind>(threats.begin(), threats.end()).size() != threats.size())
        throw DomainError("enumerate_conditions: duplicate coordinate");
    std::vector<ExperimentCondition> out;
    out.reserve(models.size() * domains.size() * threats.size());
    for (const auto& m : models)
        for (auto d : domains)
            for (auto t : threats) {
                if (!is_valid(t)) throw DomainError("enumerate_conditions: unknown threat kind");
                out.push_back({m, d, t});
            }
    return out;
}

// ---------------------------------------------------------------------------
// Templates and threat fragments
// ---------------------------------------------------------------------------

inline constexpr std::string_view kContextSlot = "{context}";
inline constexpr std::string_view kExpertSlot = "{expert}";

struct PromptTemplate {
    std::string id;
    DomainId domain;
    std::string body;  // contains kContextSlot exactly once
};

inline void validate(const PromptTemplate& t) {
    if (text::trim(t.body).empty()) throw TemplateError("template '" + t.id + "': empty body");
    const auto first = t.body.find(kContextSlot);
    if (first == std::string::npos)
        throw TemplateError("template '" + t.id + "': missing " + std::string(kContextSlot) + " slot");
    if (t.body.find(kContextSlot, first + 1) != std::string::npos)
        throw TemplateError("template '" + t.id + "': more than one task slot");
}

enum class Placement { prefix, suffix };

// `fragment` is the threatening clause (empty for control); `closing` is the
// request that ends the prompt. Suffix fragments are joined to the closing
// request ("..., so" + "please provide ..."); prefix fragments open the prompt.
struct ThreatCondition {
    ThreatKind kind;
    Placement placement;
    std::string fragment;
    std::string closing;
};

class ThreatBank {
public:
    // Tab-separated records: kind, placement, fragment, closing. '#' starts a comment line.
    static ThreatBank parse(std::string_view content) {
        ThreatBank bank;
        std::array<bool, 6> seen{};
        std::size_t line_no = 0;
        for (const auto& raw : text::split(content, '\n')) {
            ++line_no;
            const auto line = text::trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto f = text::split(line, '\t');
            if (f.size() != 4) throw ParseError("threat record needs 4 tab-separated fields", line_no);
            const auto kind = parse_threat(f[0]);
            if (!kind) throw ParseError("unknown threat kind '" + f[0] + "'", line_no);
            Placement placement;
            if (f[1] == "prefix") placement = Placement::prefix;
            else if (f[1] == "suffix") placement = Placement::suffix;
            else throw ParseError("placement must be prefix or suffix", line_no);
            const auto idx = static_cast<std::size_t>(*kind);
            if (seen[idx]) throw ParseError("duplicate threat kind '" + f[0] + "'", line_no);
            seen[idx] = true;
            bank.threats_[idx] = {*kind, placement, std::string(text::trim(f[2])),
                                  std::string(text::trim(f[3]))};
        }
        for (auto kind : kAllThreats)
            if (!seen[static_cast<std::size_t>(kind)])
                throw ParseError("threat bank lacks kind '" + std::string(to_string(kind)) + "'", 0);
        if (!bank.get(ThreatKind::control).fragment.empty())
            throw ParseError("control condition must not carry a threat fragment", 0);
        return bank;
    }

    static ThreatBank load(const std::string& path) { return parse(text::read_file(path)); }

    const ThreatCondition& get(ThreatKind k) const {
        if (!is_valid(k)) throw DomainError("unknown threat kind");
        return threats_[static_cast<std::size_t>(k)];
    }

private:
    std::array<ThreatCondition, 6> threats_{};
};

class TemplateBank {
public:
    // Tab-separated records: id, domain, body.
    static TemplateBank parse(std::string_view content) {
        TemplateBank bank;
        std::set<std::string> ids;
        std::size_t line_no = 0;
        for (const auto& raw : text::split(content, '\n')) {
            ++line_no;
            const auto line = text::trim(raw);
            if (line.empty() || line.front() == '#') continue;
            const auto f = text::split(line, '\t');
            if (f.size() != 3) throw ParseError("template record needs 3 tab-separated fields", line_no);
            const auto dom = parse_domain(f[1]);
            if (!dom) throw ParseError("unknown domain '" + f[1] + "'", line_no);
            PromptTemplate t{std::string(text::trim(f[0])), *dom, std::string(text::trim(f[2]))};
            try {
                validate(t);
            } catch (const TemplateError& e) {
                throw ParseError(e.what(), line_no);
            }
            if (!ids.insert(t.id).second) throw ParseError("duplicate template id '" + t.id + "'", line_no);
            bank.templates_.push_back(std::move(t));
        }
        return bank;
    }

    static TemplateBank load(const std::string& path) { return parse(text::read_file(path)); }

    const std::vector<PromptTemplate>& all() const noexcept { return templates_; }

    std::vector<PromptTemplate> for_domain(DomainId d) const {
        std::vector<PromptTemplate> out;
        std::copy_if(templates_.begin(), templates_.end(), std::back_inserter(out),
                     [d](const PromptTemplate& t) { return t.domain == d; });
        return out;
    }

    const PromptTemplate* find(std::string_view id) const {
        for (const auto& t : templates_)
            if (t.id == id) return &t;
        return nullptr;
    }

private:
    std::vector<PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

enum class PartRole { role, stakes, standards, threat, task, closing };

inline std::string_view to_string(PartRole r) {
    switch (r) {
        case PartRole::role: return "role";
        case PartRole::stakes: return "stakes";
        case PartRole::standards: return "standards";
        case PartRole::threat: return "threat";
        case PartRole::task: return "task";
        case PartRole::closing: return "closing";
    }
    return "?";
}

struct PromptPart {
    PartRole role;
    std::string text;
};

struct ComposedPrompt {
    std::string template_id;
    std::optional<DomainId> domain;
    std::optional<ThreatKind> threat;
    std::string text;
    std::vector<PromptPart> parts;

    ExperimentCondition condition_for(const ModelId& model) const {
        if (!domain || !threat) throw DomainError("prompt has no experimental coordinates");
        return {model, *domain, *threat};
    }
};

namespace detail {

inline std::string join_parts(const std::vector<PromptPart>& parts) {
    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out.push_back(' ');
        out += p.text;
    }
    return out;
}

inline bool ends_sentence(std::string_view s) {
    return !s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?');
}

// "[Task description]." : terminal period added only when absent.
inline std::string task_sentence(std::string_view s) {
    std::string out(text::trim(s));
    if (!out.empty() && !ends_sentence(out)) out.push_back('.');
    return out;
}

inline void push_part(std::vector<PromptPart>& parts, PartRole role, std::string s) {
    if (!s.empty()) parts.push_back({role, std::move(s)});
}

}  // namespace detail

// Fills the template's slot with `context` and wraps the task with the threat
// framing. Role threats open the prompt; every other kind is a clause placed
// immediately before the closing request.
inline ComposedPrompt compose_prompt(const PromptTemplate& tpl, const ThreatCondition& threat,
                                     std::string_view context) {
    validate(tpl);
    if (!is_valid(threat.kind)) throw DomainError("unknown threat kind");

    std::string task = tpl.body;
    text::replace_all(task, kContextSlot, text::trim(context));
    if (text::trim(context).empty()) task = text::collapse_whitespace(task);

    std::string fragment = threat.fragment;
    text::replace_all(fragment, kExpertSlot, text::to_lower(domain_info(tpl.domain).short_name));

    ComposedPrompt out;
    out.template_id = tpl.id;
    out.domain = tpl.domain;
    out.threat = threat.kind;
    const bool has_threat = threat.kind != ThreatKind::control && !fragment.empty();
    if (has_threat && threat.placement == Placement::prefix)
        detail::push_part(out.parts, PartRole::threat, fragment);
    detail::push_part(out.parts, PartRole::task, detail::task_sentence(task));
    if (has_threat && threat.placement == Placement::suffix)
        detail::push_part(out.parts, PartRole::threat, fragment);
    detail::push_part(out.parts, PartRole::closing, threat.closing);
    out.text = detail::join_parts(out.parts);
    return out;
}

inline constexpr std::string_view kPlainClosing = "Please provide your analysis.";
inline constexpr std::string_view kEnhancedClosing =
    "Please provide your analysis with the thoroughness and depth that such critical decisions require.";

// Professional-responsibility framing: role, stakes and standards sentences
// (each optional, in that order) ahead of the task, then the closing request.
inline ComposedPrompt compose_enhanced(std::string_view task, std::string_view role,
                                       std::string_view stakes, std::string_view standards) {
    if (text::trim(task).empty()) throw DomainError("compose_enhanced: empty task");
    role = text::trim(role);
    stakes = text::trim(stakes);
    standards = text::trim(standards);

    ComposedPrompt out;
    out.template_id = "enhanced";
    if (!role.empty()) detail::push_part(out.parts, PartRole::role, "You are a " + std::string(role) + ".");
    if (!stakes.empty())
        detail::push_part(out.parts, PartRole::stakes,
                          "Your analysis will directly influence decisions " + std::string(stakes) + ".");
    if (!standards.empty())
        detail::push_part(out.parts, PartRole::standards,
                          "Your professional expertise and reputation depend on providing comprehensive, "
                          "well-reasoned analysis that meets " +
                              std::string(standards) + ".");
    const bool enhanced = !out.parts.empty();
    detail::push_part(out.parts, PartRole::task, detail::task_sentence(task));
    detail::push_part(out.parts, PartRole::closing,
                      std::string(enhanced ? kEnhancedClosing : kPlainClosing));
    out.text = detail::join_parts(out.parts);
    return out;
}

}  // namespace threatbench
