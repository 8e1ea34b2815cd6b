#pragma once

// Derivation of new facts from ground facts: closed-world negation, inverse,
// symmetric saturation, and transitive closure. Which rules apply to a
// predicate is driven entirely by its relation properties.

#include <algorithm>
#include <optional>
#include <random>

#include "fchprobe/knowledge.hpp"

namespace fchprobe::derivation {

using knowledge::Fact;
using knowledge::FactStore;
using knowledge::RelationCategory;
using knowledge::RelProp;

enum class Rule { neg, inverse, sym, trans, composite };

inline const char* rule_name(Rule r) {
    switch (r) {
        case Rule::neg: return "neg";
        case Rule::inverse: return "inverse";
        case Rule::sym: return "sym";
        case Rule::trans: return "trans";
        default: return "composite";
    }
}

inline std::optional<Rule> parse_rule(const std::string& s) {
    for (Rule r : {Rule::neg, Rule::inverse, Rule::sym, Rule::trans, Rule::composite})
        if (s == rule_name(r)) return r;
    return std::nullopt;
}

// For a negation-derived fact the single parent records the positive literal
// whose absence licenses the derivation.
struct DerivedFact {
    Fact fact;
    Rule rule = Rule::neg;
    std::vector<Fact> parents;

    auto operator<=>(const DerivedFact&) const = default;
};

inline std::string negation_name(const std::string& nm) { return "not_" + nm; }

// Fresh names for inverse predicates: a curated table for relations with a
// natural counterpart, "_inv" otherwise.
inline std::string inverse_name(const std::string& nm) {
    static const std::map<std::string, std::string> overrides = {
        {"influence_by", "influence"},
        {"killed_by", "killed"},
        {"proved_by", "proved"},
        {"discovered_by", "discovered"},
        {"written_by", "wrote"},
        {"follows", "followed_by"},
        {"replaces", "replaced_by"},
        {"appeared_before", "appeared_after"},
    };
    auto it = overrides.find(nm);
    return it != overrides.end() ? it->second : nm + "_inv";
}

// Candidate-pair domain for closed-world negation. By default the subject and
// object pools are the entities appearing in the matching position of the
// predicate's own facts; both pools can be overridden. Pair counts above
// max_pairs are down-sampled with the seeded RNG.
struct NegDomainPolicy {
    std::optional<std::vector<std::string>> subjects;
    std::optional<std::vector<std::string>> objects;
    bool exclude_identity = true;
    std::size_t max_pairs = 1000;
    std::uint64_t seed = 0;
};

inline std::vector<DerivedFact> derive_negation(const FactStore& store, const std::string& nm,
                                                const NegDomainPolicy& policy = {}) {
    const knowledge::RelationMeta* meta = store.relation(nm);
    if (!meta || !meta->has(RelProp::neg))
        throw Error("relation '" + nm + "' does not allow the negation rule");
    std::vector<Fact> positives = store.facts_of(nm);
    if (positives.empty()) return {};

    std::set<std::string> subj_pool, obj_pool;
    if (policy.subjects)
        subj_pool.insert(policy.subjects->begin(), policy.subjects->end());
    else
        for (const Fact& f : positives) subj_pool.insert(f.subject);
    if (policy.objects)
        obj_pool.insert(policy.objects->begin(), policy.objects->end());
    else
        for (const Fact& f : positives) obj_pool.insert(f.object);

    std::vector<std::pair<std::string, std::string>> candidates;
    for (const std::string& s : subj_pool)
        for (const std::string& o : obj_pool) {
            if (policy.exclude_identity && s == o) continue;
            if (store.has_fact(Fact{nm, s, o})) continue;
            candidates.emplace_back(s, o);
        }
    if (candidates.size() > policy.max_pairs) {
        std::vector<std::pair<std::string, std::string>> sampled;
        std::mt19937_64 rng(policy.seed);
        std::sample(candidates.begin(), candidates.end(), std::back_inserter(sampled),
                    policy.max_pairs, rng);
        candidates = std::move(sampled);
    }

    std::vector<DerivedFact> out;
    out.reserve(candidates.size());
    for (auto& [s, o] : candidates)
        out.push_back(DerivedFact{Fact{negation_name(nm), s, o}, Rule::neg, {Fact{nm, s, o}}});
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<DerivedFact> derive_inverse(const FactStore& store, const std::string& nm,
                                               const std::string& nm_new) {
    const knowledge::RelationMeta* meta = store.relation(nm);
    if (!meta || !meta->has(RelProp::inverse))
        throw Error("relation '" + nm + "' does not allow the inverse rule");
    if (store.has_predicate(nm_new) || nm_new == "start" || nm_new == "end")
        throw Error("inverse name '" + nm_new + "' collides with an existing predicate");
    std::vector<DerivedFact> out;
    for (const Fact& f : store.facts_of(nm))
        out.push_back(DerivedFact{Fact{nm_new, f.object, f.subject}, Rule::inverse, {f}});
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<DerivedFact> saturate_symmetric(const FactStore& store, const std::string& nm) {
    const knowledge::RelationMeta* meta = store.relation(nm);
    if (!meta || !meta->has(RelProp::sym))
        throw Error("relation '" + nm + "' does not allow the symmetric rule");
    std::vector<DerivedFact> out;
    for (const Fact& f : store.facts_of(nm)) {
        Fact flipped{nm, f.object, f.subject};
        if (!store.has_fact(flipped))
            out.push_back(DerivedFact{std::move(flipped), Rule::sym, {f}});
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Fixpoint iteration to the least transitive superset. Facts found after the
// first round chain through earlier derived facts and are labeled composite.
inline std::vector<DerivedFact> saturate_transitive(const FactStore& store, const std::string& nm) {
    const knowledge::RelationMeta* meta = store.relation(nm);
    if (!meta || !meta->has(RelProp::trans))
        throw Error("relation '" + nm + "' does not allow the transitive rule");

    std::set<std::pair<std::string, std::string>> ground;
    for (const Fact& f : store.facts_of(nm)) ground.insert({f.subject, f.object});

    std::map<std::string, std::set<std::string>> succ;
    for (const auto& [s, o] : ground) succ[s].insert(o);

    std::set<std::pair<std::string, std::string>> known = ground;
    std::vector<DerivedFact> out;
    bool first_round = true;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<DerivedFact> round;
        for (const auto& [a, outs] : succ) {
            for (const std::string& b : outs) {
                auto it = succ.find(b);
                if (it == succ.end()) continue;
                for (const std::string& c : it->second) {
                    if (known.count({a, c})) continue;
                    Rule rule = first_round && ground.count({a, b}) && ground.count({b, c})
                                    ? Rule::trans
                                    : Rule::composite;
                    round.push_back(
                        DerivedFact{Fact{nm, a, c}, rule, {Fact{nm, a, b}, Fact{nm, b, c}}});
                    known.insert({a, c});
                }
            }
        }
        if (!round.empty()) {
            changed = true;
            for (DerivedFact& d : round) {
                succ[d.fact.subject].insert(d.fact.object);
                out.push_back(std::move(d));
            }
        }
        first_round = false;
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct DeriveOptions {
    NegDomainPolicy neg_policy;
    bool sym_before_trans = true;  // composite ordering when a predicate has both
};

// Apply every rule a predicate's properties allow, per predicate of the given
// category. Symmetric/transitive combine by running the transitive closure on
// the symmetric saturation; facts built on derived parents become composite.
inline std::vector<DerivedFact> derive_all(const FactStore& store, RelationCategory category,
                                           const DeriveOptions& options = {}) {
    std::vector<DerivedFact> out;
    for (const auto& [nm, meta] : store.relations()) {
        if (meta.category != category) continue;
        if (meta.has(RelProp::neg))
            for (DerivedFact& d : derive_negation(store, nm, options.neg_policy))
                out.push_back(std::move(d));
        if (meta.has(RelProp::inverse))
            for (DerivedFact& d : derive_inverse(store, nm, inverse_name(nm)))
                out.push_back(std::move(d));

        bool sym = meta.has(RelProp::sym);
        bool trans = meta.has(RelProp::trans);
        if (sym && trans && options.sym_before_trans) {
            std::vector<DerivedFact> sym_facts = saturate_symmetric(store, nm);
            knowledge::FactStoreBuilder widened;
            for (const Fact& f : store.facts()) widened.add_fact(f);
            for (const auto& [rel, m] : store.relations()) widened.add_relation(m);
            for (const DerivedFact& d : sym_facts) widened.add_fact(d.fact);
            FactStore staged = widened.freeze();
            std::set<Fact> ground(store.facts().begin(), store.facts().end());
            for (DerivedFact& d : saturate_transitive(staged, nm)) {
                bool derived_parent = false;
                for (const Fact& p : d.parents) derived_parent |= !ground.count(p);
                if (derived_parent) d.rule = Rule::composite;
                out.push_back(std::move(d));
            }
            for (DerivedFact& d : sym_facts) out.push_back(std::move(d));
        } else {
            if (trans)
                for (DerivedFact& d : saturate_transitive(store, nm)) out.push_back(std::move(d));
            if (sym)
                for (DerivedFact& d : saturate_symmetric(store, nm)) out.push_back(std::move(d));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Re-run a derived fact's rule against its recorded parents; used to check
// provenance soundness.
inline bool replay_rule(const DerivedFact& d, const FactStore& store) {
    switch (d.rule) {
        case Rule::neg: {
            if (d.parents.size() != 1) return false;
            const Fact& p = d.parents[0];
            return d.fact.nm == negation_name(p.nm) && d.fact.subject == p.subject &&
                   d.fact.object == p.object && !store.has_fact(p);
        }
        case Rule::inverse: {
            if (d.parents.size() != 1) return false;
            const Fact& p = d.parents[0];
            return d.fact.subject == p.object && d.fact.object == p.subject && store.has_fact(p);
        }
        case Rule::sym: {
            if (d.parents.size() != 1) return false;
            const Fact& p = d.parents[0];
            return d.fact.nm == p.nm && d.fact.subject == p.object && d.fact.object == p.subject &&
                   store.has_fact(p);
        }
        case Rule::trans:
        case Rule::composite: {
            if (d.parents.size() != 2) return false;
            const Fact& p1 = d.parents[0];
            const Fact& p2 = d.parents[1];
            return d.fact.nm == p1.nm && p1.nm == p2.nm && p1.object == p2.subject &&
                   d.fact.subject == p1.subject && d.fact.object == p2.object;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const DerivedFact& d) {
    nlohmann::json parents = nlohmann::json::array();
    for (const Fact& p : d.parents)
        parents.push_back({{"nm", p.nm}, {"subject", p.subject}, {"object", p.object}});
    return {{"nm", d.fact.nm},
            {"subject", d.fact.subject},
            {"object", d.fact.object},
            {"rule", rule_name(d.rule)},
            {"parents", parents}};
}

inline DerivedFact derived_fact_from_json(const nlohmann::json& j) {
    DerivedFact d;
    d.fact =
        Fact{j.at("nm").get<std::string>(), j.at("subject").get<std::string>(),
             j.at("object").get<std::string>()};
    auto rule = parse_rule(j.at("rule").get<std::string>());
    if (!rule) throw Error("unknown rule '" + j.at("rule").get<std::string>() + "'");
    d.rule = *rule;
    for (const auto& p : j.at("parents"))
        d.parents.push_back(Fact{p.at("nm").get<std::string>(), p.at("subject").get<std::string>(),
                                 p.at("object").get<std::string>()});
    return d;
}

}  // namespace fchprobe::derivation
