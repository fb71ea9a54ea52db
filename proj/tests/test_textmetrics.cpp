#include <catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracle/metrics.hpp"
#include "threatbench/textmetrics.hpp"

using namespace threatbench;
using namespace threatbench::textmetrics;
using Catch::Approx;

namespace {

const std::string kData = THREATBENCH_DATA_DIR;

struct Fixture {
    std::string id;
    DomainId domain;
    std::string text;
};

const std::vector<Fixture>& fixtures() {
    static const std::vector<Fixture> all = [] {
        std::vector<Fixture> out;
        std::ifstream in(THREATBENCH_FIXTURE_DIR "/metric_responses.jsonl");
        std::string line;
        while (std::getline(in, line)) {
            const auto j = nlohmann::json::parse(line);
            out.push_back({j["id"], *parse_domain(j["domain"].get<std::string>()), j["text"]});
        }
        return out;
    }();
    return all;
}

struct Env {
    LexiconSet lexicons{Lexicon::load(LexiconCategory::analytical, kData + "/lexicons/analytical.txt"),
                        Lexicon::load(LexiconCategory::certainty, kData + "/lexicons/certainty.txt"),
                        Lexicon::load(LexiconCategory::defensive, kData + "/lexicons/defensive.txt"),
                        Lexicon::load(LexiconCategory::formal, kData + "/lexicons/formal.txt")};
    ReferenceSet refs = ReferenceSet::load(kData + "/references.tsv");
    LexicalSimilarity provider{refs.all_passages()};
    MetricContext ctx{lexicons, refs, provider};
};

Env& env() {
    static Env e;
    return e;
}

Lexicon words(LexiconCategory c, std::vector<std::string> terms) { return Lexicon(c, terms); }

}  // namespace

TEST_CASE("tokenizer examples") {
    CHECK(tokenize("The cat sat.") == std::vector<std::string>{"the", "cat", "sat"});
    CHECK(tokenize("Don't stop—well-known 15-20% gains") ==
          std::vector<std::string>{"don't", "stop", "well-known", "15-20", "gains"});
    CHECK(tokenize("it\xe2\x80\x99s caf\xc3\xa9") == std::vector<std::string>{"it's", "caf\xc3\xa9"});
    CHECK(tokenize("'quoted' -dash- end-") == std::vector<std::string>{"quoted", "dash", "end"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("... !!").empty());
}

TEST_CASE("sentence segmentation examples") {
    CHECK(split_sentences("The cat sat.").size() == 1);
    CHECK(split_sentences("A. B? C!") == std::vector<std::string>{"A.", "B?", "C!"});
    CHECK(split_sentences("Dr. Smith arrived. He sat.").size() == 2);
    CHECK(split_sentences("Costs rose 3.5 percent. Why?!").size() == 2);
    CHECK(split_sentences("He said \"Stop.\" Then left.").size() == 2);
    CHECK(split_sentences("No terminator here").size() == 1);
    CHECK(split_sentences("1. First item\n2. Second item.").size() == 1);
    CHECK(split_sentences("").empty());
    CHECK(split_sentences("?! ...").empty());
}

TEST_CASE("syllable examples") {
    CHECK(count_syllables("cat") == 1);
    CHECK(count_syllables("the") == 1);
    CHECK(count_syllables("make") == 1);
    CHECK(count_syllables("table") == 2);
    CHECK(count_syllables("analysis") == 4);
    CHECK(count_syllables("rhythm") == 1);
    CHECK(count_syllables("2024") == 1);
}

TEST_CASE("structural counts") {
    const auto abc = structural("abc");
    CHECK(abc.length_chars == 3);
    CHECK(abc.words == 1);
    CHECK(abc.sentences == 1);
    const auto empty = structural("");
    CHECK(empty.length_chars == 0);
    CHECK(empty.words == 0);
    CHECK(empty.sentences == 0);
    CHECK(structural("na\xc3\xafve").length_chars == 5);

    // The worked baseline policy response; its exact code-point count is 200.
    const std::string baseline =
        "The policy proposal has several benefits including cost reduction and improved efficiency. However, there "
        "are concerns about implementation challenges and potential negative impacts on certain groups.";
    const auto b = structural(baseline);
    CHECK(b.length_chars == 200);
    CHECK(b.length_chars == baseline.size());
    CHECK(b.words == 26);
    CHECK(b.sentences == 2);
}

TEST_CASE("Flesch-Kincaid grade") {
    // 3 words, 1 sentence, 3 syllables: 0.39*3 + 11.8*1 - 15.59 = -2.62
    CHECK(flesch_kincaid("The cat sat.") == Approx(-2.62).margin(0.01));
    CHECK(flesch_kincaid("The cat sat.") == Approx(0.39 * 3 + 11.8 - 15.59).margin(1e-12));
    CHECK_THROWS_AS(flesch_kincaid(""), UndefinedScore);

    // Doubling each sentence doubles the words-per-sentence term exactly.
    const auto once = readability_counts("The cat sat. A dog ran.");
    const auto twice = readability_counts("The cat sat the cat sat. A dog ran a dog ran.");
    CHECK(twice.words == 2 * once.words);
    CHECK(twice.sentences == once.sentences);
    const double wps1 = static_cast<double>(once.words) / static_cast<double>(once.sentences);
    const double wps2 = static_cast<double>(twice.words) / static_cast<double>(twice.sentences);
    CHECK(wps2 == 2 * wps1);
}

TEST_CASE("lexicon score") {
    const auto certainty = words(LexiconCategory::certainty, {"always", "never"});
    const std::vector<std::string> ten{"we", "always", "act", "and", "never", "wait", "for", "the", "right", "time"};
    CHECK(lexicon_score(ten, certainty) == Approx(0.2).margin(1e-15));
    CHECK(lexicon_score({"maybe", "later"}, certainty) == 0.0);
    CHECK(lexicon_score({"always", "never", "always"}, certainty) == 1.0);
    CHECK_THROWS_AS(lexicon_score({}, certainty), UndefinedScore);

    const auto prefix = words(LexiconCategory::analytical, {"analy*"});
    CHECK(lexicon_score({"analysis", "analyst", "anal", "banalyze"}, prefix) == 0.5);
    // Multi-word phrases never count toward the token score.
    const auto phrase = words(LexiconCategory::defensive, {"it depends"});
    CHECK(lexicon_score({"it", "depends"}, phrase) == 0.0);

    CHECK_THROWS_AS(Lexicon(LexiconCategory::formal, {"", "  ", "#"}), DomainError);
}

TEST_CASE("pattern ratio") {
    const auto lex = words(LexiconCategory::defensive, {"perhaps"});
    CHECK(pattern_ratio("perhaps " + std::string(90, 'z') + " y", lex) == Approx(0.01).margin(1e-15));
    CHECK(pattern_ratio("nothing to see", lex) == 0.0);
    CHECK_THROWS_AS(pattern_ratio("   ", lex), UndefinedScore);

    // Overlapping and nested phrases each count.
    const auto overlap = words(LexiconCategory::defensive, {"it depends", "depends on", "it depends on", "on"});
    const std::string s = "It depends on it. It depends on the weather, on balance.";
    const auto toks = tokenize(s);
    std::size_t naive = 0;
    for (std::size_t i = 0; i < toks.size(); ++i)
        for (const auto& p : overlap.patterns()) {
            bool ok = i + p.tokens.size() <= toks.size();
            for (std::size_t k = 0; ok && k < p.tokens.size(); ++k) ok = toks[i + k] == p.tokens[k];
            naive += ok;
        }
    CHECK(naive == 9);
    CHECK(overlap.count_matches(toks) == naive);
    CHECK(pattern_ratio(s, overlap) == Approx(9.0 / static_cast<double>(s.size())).epsilon(1e-15));
}

TEST_CASE("lexical similarity") {
    LexicalSimilarity sim({"the cat sat on the mat", "dogs bark loudly", "cats and dogs"});
    const DomainReference ref{DomainId::creative, {"the cat sat on the mat", "dogs bark loudly"}};
    CHECK(appropriateness("the cat sat on the mat", ref, sim) == Approx(1.0).margin(1e-12));
    CHECK(appropriateness("quantum entanglement", ref, sim) == 0.0);
    CHECK_THROWS_AS(appropriateness("x", DomainReference{DomainId::creative, {}}, sim), DomainError);

    // Hand-computed vectors. N = 3; df(cat) = 1, df(dogs) = 2, df(bark) = 1.
    const double idf1 = std::log(4.0 / 2.0) + 1.0;
    const double idf2 = std::log(4.0 / 3.0) + 1.0;
    const double idf0 = std::log(4.0 / 1.0) + 1.0;  // unseen term
    // a = "cat dogs"  -> tf 1/2 each;  b = "dogs bark loudly" -> tf 1/3 each
    const double a_cat = 0.5 * idf1, a_dogs = 0.5 * idf2, a_new = 0.0;
    const double b_dogs = idf2 / 3, b_bark = idf1 / 3, b_loud = idf1 / 3;
    const double expected = (a_dogs * b_dogs) / (std::sqrt(a_cat * a_cat + a_dogs * a_dogs + a_new) *
                                                 std::sqrt(b_dogs * b_dogs + b_bark * b_bark + b_loud * b_loud));
    CHECK(sim.cosine("cat dogs", "dogs bark loudly") == Approx(expected).margin(1e-12));
    CHECK(sim.idf("zebra") == Approx(idf0));

    const DomainReference two{DomainId::creative, {"cat dogs", "dogs bark loudly"}};
    CHECK(appropriateness("dogs bark loudly", two, sim, Aggregation::mean) ==
          Approx((1.0 + expected) / 2).margin(1e-12));
}

TEST_CASE("diversity and average sentence length") {
    CHECK(diversity(tokenize("the cat the dog")) == 0.75);
    CHECK(diversity(tokenize("all words differ here")) == 1.0);
    CHECK_THROWS_AS(diversity({}), UndefinedScore);
    CHECK(avg_sentence_length(12, 3) == 4.0);
    CHECK_THROWS_AS(avg_sentence_length(1, 0), UndefinedScore);
}

TEST_CASE("fixture responses match brute-force oracles") {
    const auto& fx = fixtures();
    REQUIRE(fx.size() == 50);
    const auto lex = oracle::Lexicons::load(kData + "/lexicons");
    const auto refs = oracle::read_references(kData + "/references.tsv");
    std::vector<std::string> corpus;
    for (const auto& [_, v] : refs) corpus.insert(corpus.end(), v.begin(), v.end());
    const oracle::Tfidf tfidf(corpus);

    for (const auto& f : fx) {
        INFO(f.id << ": " << f.text);
        const auto v = metric_vector(f.text, f.domain, env().ctx);
        REQUIRE(v.complete());
        const auto o = oracle::score(f.text, refs.at(std::string(domain_info(f.domain).key)), lex, tfidf);
        CHECK(v.value(MetricId::length) == o.length);
        CHECK(v.value(MetricId::words) == o.words);
        CHECK(v.value(MetricId::sentences) == o.sentences);
        CHECK(v.analytical == Approx(o.analytical).margin(1e-9));
        CHECK(v.certainty == Approx(o.certainty).margin(1e-9));
        CHECK(v.complexity == Approx(o.complexity).margin(1e-9));
        CHECK(v.appropriateness == Approx(o.appropriateness).margin(1e-9));
        CHECK(v.defensive == Approx(o.defensive).margin(1e-9));
        CHECK(v.formal == Approx(o.formal).margin(1e-9));
        CHECK(v.diversity == Approx(o.diversity).margin(1e-9));
        CHECK(v.avg_sentence_len == Approx(o.avg_sentence_len).margin(1e-9));

        std::vector<std::string> toks = tokenize(f.text);
        for (const auto& t : toks) CHECK(count_syllables(t) == oracle::syllables(t));
    }
}

TEST_CASE("metric vector equals independent metric calls") {
    auto& e = env();
    for (const auto& f : fixtures()) {
        const auto v = metric_vector(f.text, f.domain, e.ctx);
        const auto s = text::trim(f.text);
        const auto st = structural(s);
        const auto toks = tokenize(s);
        CHECK(v.length_chars == st.length_chars);
        CHECK(v.words == st.words);
        CHECK(v.sentences == st.sentences);
        CHECK(v.analytical == lexicon_score(toks, e.lexicons.analytical));
        CHECK(v.certainty == lexicon_score(toks, e.lexicons.certainty));
        CHECK(v.complexity == flesch_kincaid(s));
        CHECK(v.appropriateness == appropriateness(s, e.refs.for_domain(f.domain), e.provider));
        CHECK(v.defensive == pattern_ratio(s, e.lexicons.defensive));
        CHECK(v.formal == pattern_ratio(s, e.lexicons.formal));
        CHECK(v.diversity == diversity(toks));
        CHECK(v.avg_sentence_len == avg_sentence_length(st.words, st.sentences));
    }
}

TEST_CASE("metric vector invariants") {
    auto& e = env();
    for (const auto& f : fixtures()) {
        const auto v = metric_vector(f.text, f.domain, e.ctx);
        CHECK(v.words <= v.length_chars);
        CHECK(v.sentences >= 1);
        CHECK(v.diversity > 0.0);
        CHECK(v.diversity <= 1.0);
        CHECK(v.avg_sentence_len * static_cast<double>(v.sentences) == Approx(static_cast<double>(v.words)).epsilon(1e-15));
        CHECK(v.analytical >= 0.0);
        CHECK(v.analytical <= 1.0);
        CHECK(v.certainty <= 1.0);
        CHECK(v.appropriateness >= 0.0);
        CHECK(v.appropriateness <= 1.0);
        CHECK(v.defensive >= 0.0);
        CHECK(v.formal >= 0.0);

        // Surrounding whitespace does not change any metric.
        const auto padded = metric_vector(f.text + "  \n\t", f.domain, e.ctx);
        const auto lead = metric_vector("\n " + f.text, f.domain, e.ctx);
        for (auto m : kAllMetrics) {
            CHECK(padded.value(m) == v.value(m));
            CHECK(lead.value(m) == v.value(m));
        }
    }
}

TEST_CASE("diversity equals 1 exactly when tokens are distinct") {
    CHECK(metric_vector("alpha beta gamma delta.", DomainId::question_answering, env().ctx).diversity == 1.0);
    CHECK(metric_vector("alpha beta alpha.", DomainId::question_answering, env().ctx).diversity < 1.0);
    CHECK(metric_vector("the cat the dog", DomainId::creative, env().ctx).diversity == 0.75);
}

TEST_CASE("boundary text of 51 characters") {
    const std::string s = "Short reply that is exactly long enough to be valid";
    REQUIRE(s.size() == 51);
    const auto v = metric_vector(s, DomainId::question_answering, env().ctx);
    CHECK(v.complete());
    CHECK(v.length_chars == 51);
    CHECK(v.sentences == 1);
    CHECK(v.words == 10);
    CHECK(v.diversity <= 1.0);
}

TEST_CASE("degenerate text leaves token metrics undefined") {
    const auto v = metric_vector("   ", DomainId::question_answering, env().ctx);
    CHECK(v.has(MetricId::length));
    CHECK_FALSE(v.has(MetricId::analytical));
    CHECK_FALSE(v.has(MetricId::defensive));
    CHECK_FALSE(v.complete());
    const auto punct = metric_vector("?!", DomainId::question_answering, env().ctx);
    CHECK(punct.has(MetricId::defensive));
    CHECK_FALSE(punct.has(MetricId::diversity));
}

TEST_CASE("scores are monotone under appending") {
    auto& e = env();
    std::mt19937 rng(99);
    const std::vector<std::string> neutral{"table", "river", "blue", "seven", "window"};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> toks;
        const int n = 1 + static_cast<int>(rng() % 20);
        for (int i = 0; i < n; ++i) {
            const auto r = rng() % 4;
            toks.push_back(r == 0 ? "always" : r == 1 ? "perhaps" : neutral[rng() % neutral.size()]);
        }
        const double base = lexicon_score(toks, e.lexicons.certainty);
        auto more = toks;
        more.push_back("never");
        CHECK(lexicon_score(more, e.lexicons.certainty) >= base);
        auto less = toks;
        less.push_back("table");
        CHECK(lexicon_score(less, e.lexicons.certainty) <= base);

        std::string text;
        for (const auto& t : toks) text += (text.empty() ? "" : " ") + t;
        // The ratio grows with an appended match of length L whenever it is
        // below 1/L, i.e. the appended text is denser than the text itself.
        const double r0 = pattern_ratio(text, e.lexicons.defensive);
        const std::string match = " perhaps";
        if (r0 <= 1.0 / static_cast<double>(match.size()))
            CHECK(pattern_ratio(text + match, e.lexicons.defensive) >= r0);
        CHECK(e.lexicons.defensive.count_matches(tokenize(text + match)) ==
              e.lexicons.defensive.count_matches(toks) + 1);
        CHECK(pattern_ratio(text + " table river", e.lexicons.defensive) <= r0);
    }
}

TEST_CASE("lexicon files load and normalize") {
    auto& e = env();
    CHECK(e.lexicons.analytical.patterns().size() >= 50);
    CHECK(e.lexicons.defensive.category() == LexiconCategory::defensive);
    for (const auto* lex : {&e.lexicons.analytical, &e.lexicons.certainty, &e.lexicons.defensive, &e.lexicons.formal})
        for (const auto& p : lex->patterns())
            for (const auto& t : p.tokens) CHECK(t == text::to_lower(t));
    for (auto d : all_domains()) CHECK_FALSE(e.refs.for_domain(d).passages.empty());
    CHECK_THROWS_AS(ReferenceSet::parse("nowhere\tsome text\n"), ParseError);
    CHECK_THROWS_AS(ReferenceSet::parse("policy has no tab\n"), ParseError);
}

TEST_CASE("parallel scoring matches serial scoring") {
    auto& e = env();
    const auto& fx = fixtures();
    const auto text_of = [](const Fixture& f) { return f.text; };
    const auto domain_of = [](const Fixture& f) { return f.domain; };
    const auto serial = score_all(fx, e.ctx, text_of, domain_of, 1);
    const auto parallel = score_all(fx, e.ctx, text_of, domain_of, 8);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i)
        for (auto m : kAllMetrics) CHECK(serial[i].value(m) == parallel[i].value(m));
}
