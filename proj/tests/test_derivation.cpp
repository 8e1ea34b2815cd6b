#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fchprobe/derivation.hpp"
#include "testutil.hpp"

using namespace fchprobe;
using derivation::DerivedFact;
using derivation::NegDomainPolicy;
using derivation::Rule;
using knowledge::Fact;
using knowledge::FactStore;

namespace {

FactStore store_with_pairs(const std::string& nm, const std::string& category,
                           const std::vector<std::string>& props,
                           const std::vector<std::pair<std::string, std::string>>& pairs) {
    knowledge::FactStoreBuilder b;
    knowledge::RelationMeta meta;
    meta.nm = nm;
    meta.category = *knowledge::parse_relation_category(category);
    for (const std::string& p : props) meta.props.insert(*knowledge::parse_prop(p));
    b.add_relation(meta);
    for (const auto& [s, o] : pairs) b.add_fact(Fact{nm, s, o});
    return b.freeze();
}

std::set<std::pair<std::string, std::string>> pair_set(const std::vector<DerivedFact>& facts) {
    std::set<std::pair<std::string, std::string>> out;
    for (const DerivedFact& d : facts) out.insert({d.fact.subject, d.fact.object});
    return out;
}

// Floyd-Warshall reachability oracle over the node set of the relation.
std::set<std::pair<std::string, std::string>> transitive_closure_oracle(
    const std::vector<std::pair<std::string, std::string>>& edges) {
    std::set<std::string> node_set;
    for (const auto& [a, b] : edges) {
        node_set.insert(a);
        node_set.insert(b);
    }
    std::vector<std::string> nodes(node_set.begin(), node_set.end());
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < nodes.size(); ++i) idx[nodes[i]] = i;
    std::size_t n = nodes.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (const auto& [a, b] : edges) reach[idx[a]][idx[b]] = true;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    std::set<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (reach[i][j]) out.insert({nodes[i], nodes[j]});
    return out;
}

std::vector<std::pair<std::string, std::string>> random_digraph(std::mt19937_64& rng,
                                                                int max_nodes) {
    std::uniform_int_distribution<int> node_count(2, max_nodes);
    int n = node_count(rng);
    std::uniform_int_distribution<int> node(0, n - 1);
    std::uniform_int_distribution<int> edge_count(1, 2 * n);
    std::set<std::pair<std::string, std::string>> edges;
    int m = edge_count(rng);
    for (int i = 0; i < m; ++i) {
        int a = node(rng);
        int b = node(rng);
        if (a == b) continue;
        edges.insert({"n" + std::to_string(a), "n" + std::to_string(b)});
    }
    if (edges.empty()) edges.insert({"n0", "n1"});
    return {edges.begin(), edges.end()};
}

}  // namespace

TEST_CASE("negation derives the closed-world complement of the domain") {
    FactStore s = store_with_pairs("was", "verb_active", {"neg"}, {{"a", "b"}});
    NegDomainPolicy policy;
    policy.subjects = std::vector<std::string>{"a", "b"};
    policy.objects = std::vector<std::string>{"a", "b"};
    auto derived = derive_negation(s, "was", policy);
    REQUIRE(derived.size() == 1);
    CHECK(derived[0].fact == Fact{"not_was", "b", "a"});
    CHECK(derived[0].rule == Rule::neg);
    REQUIRE(derived[0].parents.size() == 1);
    CHECK(derived[0].parents[0] == Fact{"was", "b", "a"});  // the absent positive literal

    // domain ∪ positives covers every candidate pair exactly once
    std::set<std::pair<std::string, std::string>> domain = {{"a", "b"}, {"b", "a"}};
    auto negs = pair_set(derived);
    for (const auto& pair : domain)
        CHECK((negs.count(pair) + (s.has_fact(Fact{"was", pair.first, pair.second}) ? 1 : 0)) == 1);
}

TEST_CASE("negation supports explicitly widened object pools") {
    FactStore s = store_with_pairs("proved_by", "verb_passive", {"neg", "inverse"},
                                   {{"kuratowski's_theorem", "kazimierz_kuratowski"}});
    NegDomainPolicy policy;
    policy.objects = std::vector<std::string>{"kazimierz_kuratowski", "kurt_gödel"};
    auto derived = derive_negation(s, "proved_by", policy);
    auto negs = pair_set(derived);
    CHECK(negs.count({"kuratowski's_theorem", "kurt_gödel"}) == 1);
    CHECK(negs.count({"kuratowski's_theorem", "kazimierz_kuratowski"}) == 0);
}

TEST_CASE("negation respects the pair cap deterministically and empty policies") {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (int i = 0; i < 12; ++i)
        pairs.push_back({"s" + std::to_string(i), "o" + std::to_string(i % 5)});
    FactStore s = store_with_pairs("rel", "verb_active", {"neg"}, pairs);

    NegDomainPolicy capped;
    capped.max_pairs = 10;
    capped.seed = 3;
    auto a = derive_negation(s, "rel", capped);
    auto b = derive_negation(s, "rel", capped);
    CHECK(a.size() == 10);
    CHECK(a == b);

    NegDomainPolicy empty;
    empty.subjects = std::vector<std::string>{};
    CHECK(derive_negation(s, "rel", empty).empty());

    FactStore no_neg = store_with_pairs("quiet", "verb_active", {"inverse"}, {{"a", "b"}});
    CHECK_THROWS_AS(derive_negation(no_neg, "quiet", {}), Error);
}

TEST_CASE("negation disjointness holds on the sample store") {
    FactStore s = testutil::sample_store();
    for (const auto& [nm, meta] : s.relations()) {
        if (!meta.has(knowledge::RelProp::neg)) continue;
        for (const DerivedFact& d : derive_negation(s, nm, {}))
            CHECK_FALSE(s.has_fact(Fact{nm, d.fact.subject, d.fact.object}));
    }
}

TEST_CASE("inverse swaps argument order under a fresh name") {
    FactStore s = store_with_pairs("influence_by", "verb_passive", {"neg", "inverse"},
                                   {{"haruki_murakami", "franz_kafka"}});
    auto derived = derive_inverse(s, "influence_by", "influence");
    REQUIRE(derived.size() == 1);
    CHECK(derived[0].fact == Fact{"influence", "franz_kafka", "haruki_murakami"});
    CHECK(derived[0].rule == Rule::inverse);
    CHECK(derived[0].parents == std::vector<Fact>{Fact{"influence_by", "haruki_murakami",
                                                       "franz_kafka"}});

    FactStore empty = store_with_pairs("influence_by", "verb_passive", {"inverse"}, {});
    CHECK(derive_inverse(empty, "influence_by", "influence").empty());

    CHECK_THROWS_AS(derive_inverse(s, "influence_by", "influence_by"), Error);
    FactStore no_inv = store_with_pairs("fixed", "verb_passive", {"neg"}, {{"a", "b"}});
    CHECK_THROWS_AS(derive_inverse(no_inv, "fixed", "fixed_inv"), Error);
}

TEST_CASE("inverse involution restores the original pair set") {
    std::mt19937_64 rng(417);
    for (int trial = 0; trial < 30; ++trial) {
        auto edges = random_digraph(rng, 10);
        if (edges.size() > 50) continue;
        FactStore s = store_with_pairs("rel", "verb_active", {"inverse"}, edges);
        auto inv = derive_inverse(s, "rel", "rel_inv");

        knowledge::FactStoreBuilder b;
        knowledge::RelationMeta meta{"rel_inv", knowledge::RelationCategory::verb_active,
                                     {knowledge::RelProp::inverse}};
        b.add_relation(meta);
        for (const DerivedFact& d : inv) b.add_fact(d.fact);
        auto twice = derive_inverse(b.freeze(), "rel_inv", "rel_inv_inv");
        CHECK(pair_set(twice) ==
              std::set<std::pair<std::string, std::string>>(
                  [&] {
                      std::set<std::pair<std::string, std::string>> out;
                      for (const auto& [a, bb] : edges) out.insert({a, bb});
                      return out;
                  }()));
    }
}

TEST_CASE("symmetric saturation") {
    FactStore single = store_with_pairs("sim", "noun", {"sym"}, {{"a", "b"}});
    auto derived = saturate_symmetric(single, "sim");
    REQUIRE(derived.size() == 1);
    CHECK(derived[0].fact == Fact{"sim", "b", "a"});

    FactStore already = store_with_pairs("sim", "noun", {"sym"}, {{"a", "b"}, {"b", "a"}});
    CHECK(saturate_symmetric(already, "sim").empty());

    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        auto edges = random_digraph(rng, 20);
        FactStore s = store_with_pairs("sim", "noun", {"sym"}, edges);
        std::set<std::pair<std::string, std::string>> expected;
        for (const auto& [a, b] : edges) {
            expected.insert({a, b});
            expected.insert({b, a});
        }
        std::set<std::pair<std::string, std::string>> got;
        for (const auto& [a, b] : edges) got.insert({a, b});
        for (const DerivedFact& d : saturate_symmetric(s, "sim"))
            got.insert({d.fact.subject, d.fact.object});
        CHECK(got == expected);
    }
}

TEST_CASE("transitive saturation reaches the least fixpoint") {
    FactStore chain = store_with_pairs("part_of", "noun", {"trans"}, {{"a", "b"}, {"b", "c"}});
    auto derived = saturate_transitive(chain, "part_of");
    REQUIRE(derived.size() == 1);
    CHECK(derived[0].fact == Fact{"part_of", "a", "c"});
    CHECK(derived[0].rule == Rule::trans);
    CHECK(derived[0].parents ==
          std::vector<Fact>{Fact{"part_of", "a", "b"}, Fact{"part_of", "b", "c"}});

    FactStore cycle = store_with_pairs("part_of", "noun", {"trans"}, {{"a", "b"}, {"b", "a"}});
    auto cyc = saturate_transitive(cycle, "part_of");
    CHECK(pair_set(cyc) == std::set<std::pair<std::string, std::string>>{{"a", "a"}, {"b", "b"}});
}

TEST_CASE("transitive saturation matches the Floyd-Warshall oracle on random digraphs") {
    std::mt19937_64 rng(5150);
    for (int trial = 0; trial < 60; ++trial) {
        auto edges = random_digraph(rng, 30);
        FactStore s = store_with_pairs("rel", "noun", {"trans"}, edges);
        std::set<std::pair<std::string, std::string>> got;
        for (const auto& [a, b] : edges) got.insert({a, b});
        for (const DerivedFact& d : saturate_transitive(s, "rel"))
            got.insert({d.fact.subject, d.fact.object});
        CHECK(got == transitive_closure_oracle(edges));
    }
}

TEST_CASE("derive_all applies every allowed rule per relation") {
    FactStore s = testutil::sample_store();

    auto verb_active = derive_all(s, knowledge::RelationCategory::verb_active);
    std::set<Fact> union_of_ops;
    for (const auto& [nm, meta] : s.relations()) {
        if (meta.category != knowledge::RelationCategory::verb_active) continue;
        if (meta.has(knowledge::RelProp::neg))
            for (const DerivedFact& d : derive_negation(s, nm, {})) union_of_ops.insert(d.fact);
        if (meta.has(knowledge::RelProp::inverse))
            for (const DerivedFact& d : derive_inverse(s, nm, derivation::inverse_name(nm)))
                union_of_ops.insert(d.fact);
    }
    std::set<Fact> got;
    for (const DerivedFact& d : verb_active) got.insert(d.fact);
    CHECK(got == union_of_ops);
    CHECK(std::is_sorted(verb_active.begin(), verb_active.end()));
}

TEST_CASE("derive_all with no allowed props yields nothing") {
    FactStore s = store_with_pairs("plain", "noun", {}, {{"a", "b"}});
    CHECK(derive_all(s, knowledge::RelationCategory::noun_phrase).empty());
}

TEST_CASE("composite ordering runs the transitive closure over the symmetric saturation") {
    FactStore s = store_with_pairs("linked", "noun", {"sym", "trans"}, {{"a", "b"}, {"c", "b"}});
    auto derived = derive_all(s, knowledge::RelationCategory::noun_phrase);
    std::set<std::pair<std::string, std::string>> got;
    for (const auto& [x, y] : std::initializer_list<std::pair<std::string, std::string>>{
             {"a", "b"}, {"c", "b"}})
        got.insert({x, y});
    bool saw_composite = false;
    for (const DerivedFact& d : derived) {
        got.insert({d.fact.subject, d.fact.object});
        saw_composite = saw_composite || d.rule == Rule::composite;
    }
    // symmetric closure then transitive closure connects every pair through b
    std::set<std::pair<std::string, std::string>> expected;
    for (const std::string& x : {"a", "b", "c"})
        for (const std::string& y : {"a", "b", "c"}) expected.insert({x, y});
    CHECK(got == expected);
    CHECK(saw_composite);

    // saturation is idempotent: rerunning over ground ∪ derived adds nothing
    knowledge::FactStoreBuilder b;
    knowledge::RelationMeta meta{"linked", knowledge::RelationCategory::noun_phrase,
                                 {knowledge::RelProp::sym, knowledge::RelProp::trans}};
    b.add_relation(meta);
    for (const Fact& f : s.facts()) b.add_fact(f);
    for (const DerivedFact& d : derived) b.add_fact(d.fact);
    FactStore widened = b.freeze();
    CHECK(saturate_symmetric(widened, "linked").empty());
    CHECK(saturate_transitive(widened, "linked").empty());
}

TEST_CASE("provenance replay reproduces every derived fact") {
    FactStore s = testutil::sample_store();
    for (auto category : {knowledge::RelationCategory::noun_phrase,
                          knowledge::RelationCategory::verb_passive,
                          knowledge::RelationCategory::verb_active}) {
        for (const DerivedFact& d : derive_all(s, category)) {
            CHECK_FALSE(d.parents.empty());
            CHECK(derivation::replay_rule(d, s));
        }
    }
}

TEST_CASE("derived facts serialize and parse back") {
    DerivedFact d{Fact{"not_was", "b", "a"}, Rule::neg, {Fact{"was", "b", "a"}}};
    auto j = derivation::to_json(d);
    CHECK(derivation::derived_fact_from_json(j) == d);
}
