#include <catch2/catch_amalgamated.hpp>

#include "fchprobe/evaluation.hpp"
#include "testutil.hpp"

using namespace fchprobe;
using evaluation::AnswerClass;
using evaluation::Category;
using evaluation::EquivProvider;
using evaluation::SemGraph;
using evaluation::Triple;
using knowledge::Fact;

namespace {

SemGraph graph_of(std::initializer_list<Triple> triples) {
    return evaluation::build_graph(std::vector<Triple>(triples));
}

}  // namespace

TEST_CASE("answer extraction scans the leading window for whole words") {
    CHECK(evaluation::extract_answer("Yes, the original series premiered in 2005.") ==
          AnswerClass::yes);
    CHECK(evaluation::extract_answer("no — because the dates do not overlap") ==
          AnswerClass::no);
    CHECK(evaluation::extract_answer("I don't know.") == AnswerClass::refusal);
    CHECK(evaluation::extract_answer("I do not know the answer.") == AnswerClass::refusal);
    // substrings inside words do not count
    CHECK(evaluation::extract_answer("Notably, the knowledge is unclear.") == AnswerClass::refusal);
    CHECK(evaluation::extract_answer("") == AnswerClass::refusal);
    // earliest match wins
    CHECK(evaluation::extract_answer("Yes. No doubt about it.") == AnswerClass::yes);
    // matches beyond the 200-character window are ignored
    std::string padded(250, 'x');
    padded += " yes";
    CHECK(evaluation::extract_answer(padded) == AnswerClass::refusal);
}

TEST_CASE("default extractor applies the sentence patterns to list items") {
    auto triples = evaluation::extract_triples("1. Charles Dickens was born in 1812.");
    REQUIRE(triples.size() == 1);
    CHECK(triples[0] == Triple{"charles_dickens", "born_in", "1812"});

    triples = evaluation::extract_triples(
        "Yes. Knowledge:\n"
        "1. Kuratowski's theorem was proved by Kazimierz Kuratowski.\n"
        "2. Crohn's disease and ulcerative colitis share similar symptoms.\n"
        "- american_broadcasting_company -- replaces -- nbc_blue_network.\n"
        "3. 4769 Castalia follows 4768 Hartley.\n"
        "prose outside the list is ignored\n");
    std::set<Triple> got(triples.begin(), triples.end());
    CHECK(got.count(Triple{"kuratowski's_theorem", "proved_by", "kazimierz_kuratowski"}));
    CHECK(got.count(Triple{"crohn's_disease", "similar_symptoms", "ulcerative_colitis"}));
    CHECK(got.count(Triple{"american_broadcasting_company", "replaces", "nbc_blue_network"}));
    CHECK(got.count(Triple{"4769_castalia", "follows", "4768_hartley"}));
    CHECK(got.size() == 4);

    CHECK(evaluation::extract_triples("").empty());
    // duplicates collapse
    CHECK(evaluation::extract_triples("1. a -- r -- b.\n2. a -- r -- b.").size() == 1);
}

TEST_CASE("external extractor adapter consumes stdin and emits triple JSONL") {
    testutil::TempDir dir("adapter");
    testutil::write_file(dir.path() / "canned.jsonl",
                         "{\"subject\":\"a\",\"relation\":\"r1\",\"object\":\"b\"}\n"
                         "{\"subject\":\"c\",\"relation\":\"r2\",\"object\":\"d\"}\n"
                         "{\"subject\":\"e\",\"relation\":\"r3\",\"object\":\"f\"}\n");
    evaluation::ExtractorConfig config;
    config.command = "cat " + (dir.path() / "canned.jsonl").string();
    auto triples = evaluation::extract_triples("ignored", config);
    REQUIRE(triples.size() == 3);
    CHECK(triples[0] == Triple{"a", "r1", "b"});

    // adapter failure falls back to the default extractor with a warning
    evaluation::ExtractorConfig broken;
    broken.command = "false";
    std::vector<std::string> warnings;
    auto fallback = evaluation::extract_triples("1. a -- r -- b.", broken, &warnings);
    REQUIRE(fallback.size() == 1);
    CHECK(fallback[0] == Triple{"a", "r", "b"});
    REQUIRE_FALSE(warnings.empty());
}

TEST_CASE("build_graph collects nodes from endpoints") {
    SemGraph g = graph_of({{"a", "r", "b"}});
    CHECK(g.nodes == std::set<std::string>{"a", "b"});
    CHECK(g.edges.size() == 1);

    SemGraph dup = evaluation::build_graph({{"a", "r", "b"}, {"a", "r", "b"}});
    CHECK(dup.edges.size() == 1);

    std::vector<Fact> facts{{"start", "ben_10", "2005"}, {"end", "ben_10", "2008"}};
    SemGraph ground = evaluation::graph_from_facts(facts);
    CHECK(ground.edges == std::set<Triple>{{"ben_10", "start", "2005"}, {"ben_10", "end", "2008"}});
    CHECK(ground.nodes == std::set<std::string>{"2005", "2008", "ben_10"});
}

TEST_CASE("similarity equals plain set Jaccard under exact equivalence") {
    EquivProvider exact = EquivProvider::exact();

    SemGraph resp = graph_of({{"x", "e1", "x"}, {"x", "e2", "x"}, {"x", "e3", "x"}});
    SemGraph ground = graph_of({{"x", "e2", "x"}, {"x", "e3", "x"}, {"x", "e4", "x"}});
    auto [s_e, s_n] = evaluation::similarity(resp, ground, exact);
    CHECK(s_e == Catch::Approx(0.5).epsilon(1e-12));  // 2 shared of 4 total
    CHECK(s_n == Catch::Approx(1.0));

    auto [ie, in] = evaluation::similarity(resp, resp, exact);
    CHECK(ie == 1.0);
    CHECK(in == 1.0);

    SemGraph disjoint = graph_of({{"p", "q", "r"}});
    auto [de, dn] = evaluation::similarity(resp, disjoint, exact);
    CHECK(de == 0.0);
    CHECK(dn == 0.0);

    auto [ee, en] = evaluation::similarity(SemGraph{}, SemGraph{}, exact);
    CHECK(ee == 1.0);
    CHECK(en == 1.0);

    // random graphs: symmetric, bounded, and equal to an independent set computation
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        auto random_graph = [&]() {
            std::uniform_int_distribution<int> n(0, 6);
            std::vector<Triple> ts;
            int count = n(rng);
            for (int i = 0; i < count; ++i)
                ts.push_back({"n" + std::to_string(rng() % 5), "r" + std::to_string(rng() % 3),
                              "n" + std::to_string(rng() % 5)});
            return evaluation::build_graph(ts);
        };
        SemGraph a = random_graph();
        SemGraph b = random_graph();
        auto [ab_e, ab_n] = evaluation::similarity(a, b, exact);
        auto [ba_e, ba_n] = evaluation::similarity(b, a, exact);
        CHECK(ab_e == ba_e);
        CHECK(ab_n == ba_n);
        CHECK((ab_e >= 0.0 && ab_e <= 1.0));
        CHECK((ab_n >= 0.0 && ab_n <= 1.0));

        auto plain_jaccard = [](const auto& x, const auto& y) {
            if (x.empty() && y.empty()) return 1.0;
            std::size_t inter = 0;
            for (const auto& item : x) inter += y.count(item);
            return static_cast<double>(inter) / static_cast<double>(x.size() + y.size() - inter);
        };
        CHECK(ab_e == Catch::Approx(plain_jaccard(a.edges, b.edges)).epsilon(1e-12));
        CHECK(ab_n == Catch::Approx(plain_jaccard(a.nodes, b.nodes)).epsilon(1e-12));
    }
}

TEST_CASE("synonym tables quotient nodes and relations") {
    EquivProvider syn = EquivProvider::with_synonyms(
        {{"victorian_era", "the_victorian_era"}, {"start", "begin"}});
    CHECK(syn.equiv("victorian_era", "the_victorian_era"));
    CHECK(syn.equiv("the_victorian_era", "victorian_era"));  // symmetric
    CHECK(syn.equiv("Victorian Era", "victorian_era"));      // normalization
    CHECK_FALSE(syn.equiv("victorian_era", "ben_10"));

    SemGraph resp = graph_of({{"the_victorian_era", "begin", "1837"}});
    SemGraph ground = graph_of({{"victorian_era", "start", "1837"}});
    auto [s_e, s_n] = evaluation::similarity(resp, ground, syn);
    CHECK(s_e == 1.0);
    CHECK(s_n == 1.0);

    auto [x_e, x_n] = evaluation::similarity(resp, ground, EquivProvider::exact());
    CHECK(x_e == 0.0);
    CHECK(x_n == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("embedding equivalence applies the cosine threshold with memoization") {
    int calls = 0;
    auto embedder = [&calls](const std::vector<std::string>& texts) {
        ++calls;
        std::vector<std::vector<double>> out;
        for (const std::string& t : texts) {
            if (t.find("era") != std::string::npos)
                out.push_back({1.0, 0.05});
            else
                out.push_back({0.0, 1.0});
        }
        return out;
    };
    EquivProvider emb = EquivProvider::with_embedder(embedder, 0.8);
    CHECK(emb.equiv("victorian_era", "the_era"));
    CHECK_FALSE(emb.equiv("victorian_era", "ben_10"));
    int before = calls;
    CHECK(emb.equiv("victorian_era", "the_era"));  // served from the pair cache
    CHECK(calls == before);

    auto failing = EquivProvider::with_embedder(
        [](const std::vector<std::string>&) -> std::vector<std::vector<double>> {
            throw Error("endpoint down");
        },
        0.8, true);
    CHECK_FALSE(failing.equiv("a", "b"));  // exact fallback
    CHECK(failing.equiv("a", "a"));
}

TEST_CASE("classification follows the branch order") {
    evaluation::ClassifyConfig cfg;
    EquivProvider exact = EquivProvider::exact();
    SemGraph ground = graph_of({{"a", "r1", "b"}, {"c", "r2", "d"}});

    evaluation::LlmResponse refusal = evaluation::parse_response("id", "I don't know.");
    auto v = evaluation::classify(refusal, ground, cfg, exact);
    CHECK(v.category == Category::CO);
    CHECK(v.s_e == 1.0);
    CHECK(v.s_n == 1.0);

    // same nodes, wrong relations: edges below, nodes above
    evaluation::LlmResponse ei =
        evaluation::parse_response("id", "Yes.\n1. a -- wrong1 -- b.\n2. c -- r2 -- d.");
    v = evaluation::classify(ei, ground, cfg, exact);
    CHECK(v.category == Category::EI);
    CHECK(v.s_e == Catch::Approx(1.0 / 3.0));
    CHECK(v.s_n == 1.0);

    evaluation::LlmResponse ol = evaluation::parse_response("id", "Yes.\n1. x -- r -- y.");
    v = evaluation::classify(ol, ground, cfg, exact);
    CHECK(v.category == Category::OL);
    CHECK(v.s_e == 0.0);
    CHECK(v.s_n == 0.0);

    evaluation::LlmResponse co =
        evaluation::parse_response("id", "Yes.\n1. a -- r1 -- b.\n2. c -- r2 -- d.");
    v = evaluation::classify(co, ground, cfg, exact);
    CHECK(v.category == Category::CO);

    // lowering theta_e can only move verdicts toward CO on the edge branch
    evaluation::ClassifyConfig strict;
    strict.theta_e = 0.9;
    evaluation::ClassifyConfig lax;
    lax.theta_e = 0.2;
    evaluation::LlmResponse borderline =
        evaluation::parse_response("id", "Yes.\n1. a -- r1 -- b.\n2. c -- wrong -- d.");
    auto strict_v = evaluation::classify(borderline, ground, strict, exact);
    auto lax_v = evaluation::classify(borderline, ground, lax, exact);
    CHECK(strict_v.category == Category::EI);
    CHECK(lax_v.category == Category::CO);
}

TEST_CASE("the labeled response suite classifies exactly") {
    auto cases = casegen::read_cases(testutil::fixtures_dir() / "eval_cases.jsonl");
    std::map<std::string, const casegen::QaCase*> by_id;
    for (const auto& c : cases) by_id[c.id] = &c;

    evaluation::ClassifyConfig cfg;
    EquivProvider exact = EquivProvider::exact();
    std::size_t checked = 0;
    knowledge::detail::for_each_jsonl(
        testutil::fixtures_dir() / "eval_responses.jsonl", [&](const nlohmann::json& j) {
            auto resp = evaluation::parse_response("x", j.at("raw_text").get<std::string>());
            const casegen::QaCase* c = by_id.at(j.at("case_id").get<std::string>());
            auto verdict = evaluation::classify(
                resp, evaluation::graph_from_facts(c->ground_facts), cfg, exact);
            INFO(j.at("raw_text").get<std::string>());
            CHECK(evaluation::category_name(verdict.category) ==
                  j.at("expected").get<std::string>());
            ++checked;
        });
    CHECK(checked == 20);
}

TEST_CASE("report aggregates counts by domain, rule and operator") {
    std::vector<casegen::QaCase> cases;
    casegen::QaCase rel;
    rel.id = "rel-1";
    rel.kind = casegen::Kind::relational;
    rel.rule = "neg";
    rel.domain = "People/Self";
    cases.push_back(rel);
    casegen::QaCase tmp;
    tmp.id = "tmp-1";
    tmp.kind = casegen::Kind::temporal;
    tmp.formula = "F[1,3](ben_10)";
    tmp.domain = "Culture/Arts";
    cases.push_back(tmp);

    std::vector<std::pair<std::string, evaluation::Verdict>> verdicts;
    for (int i = 0; i < 10; ++i)
        verdicts.emplace_back("rel-1", evaluation::Verdict{Category::CO, 1, 1});
    for (int i = 0; i < 10; ++i)
        verdicts.emplace_back("tmp-1", evaluation::Verdict{Category::EI, 0, 1});

    evaluation::Report rep = evaluation::report(cases, verdicts);
    CHECK(rep.overall.total() == 20);
    CHECK(rep.overall.hallucination_rate() == Catch::Approx(0.5));
    CHECK(rep.by_rule.at("neg").co == 10);
    CHECK(rep.by_operator.at("F").ei == 10);
    CHECK(rep.by_domain.at("People/Self").total() == 10);

    evaluation::Report all_co = evaluation::report(
        cases, {{"rel-1", evaluation::Verdict{Category::CO, 1, 1}}});
    CHECK(all_co.overall.hallucination_rate() == 0.0);

    CHECK_THROWS_AS(
        evaluation::report(cases, {{"missing", evaluation::Verdict{Category::CO, 1, 1}}}), Error);

    std::string csv = rep.to_csv("cafe");
    CHECK(csv.find("config_hash,cafe") != std::string::npos);
    CHECK(csv.find("overall,all,20,10,10,0,0,0.500000") != std::string::npos);
    CHECK(rep.to_json("cafe")["config_hash"] == "cafe");
}
