#pragma once

// Question-answer case generation: relational cases from derived facts via
// per-category templates (with antonym mutation), temporal cases from sampled
// MTL formulas with ground-truth interval sets, and prompt rendering.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "fchprobe/derivation.hpp"
#include "fchprobe/knowledge.hpp"
#include "fchprobe/mtl.hpp"
#include "fchprobe/mtl_compile.hpp"

namespace fchprobe::casegen {

using derivation::DerivedFact;
using intervals::IntervalSet;
using knowledge::Fact;
using knowledge::FactStore;
using knowledge::RelationCategory;
using nlohmann::json;

enum class Kind { relational, temporal };
enum class Answer { yes, no };

struct QaCase {
    std::string id;
    Kind kind = Kind::relational;
    std::string question;
    Answer answer = Answer::yes;
    std::string domain;

    // relational provenance
    std::string rule;
    std::vector<Fact> parents;

    // temporal provenance
    std::string formula;
    Year t = 0;
    IntervalSet ground_set;

    std::vector<Fact> ground_facts;  // basis for the ground semantic graph
    std::vector<std::string> context_docs;
};

struct QTemplate {
    std::string text;
    bool negated = false;  // question asserts the opposite of the fact
};

struct TemporalTemplate {
    std::string top;
    std::string nested;
};

struct TemplateSet {
    std::map<RelationCategory, std::vector<QTemplate>> relational;
    std::map<mtl::Op, TemporalTemplate> temporal;
    std::vector<std::pair<std::string, std::string>> antonyms;  // tried in order

    static TemplateSet defaults();
    static TemplateSet load(const std::filesystem::path& path);
};

inline TemplateSet TemplateSet::defaults() {
    TemplateSet t;
    t.relational[RelationCategory::noun_phrase] = {
        {"Is it true that {subject} and {object} share {relation}?", false},
        {"{subject} and {object} have totally different {relation}. Please judge the truthfulness "
         "of this statement.",
         true},
    };
    t.relational[RelationCategory::verb_passive] = {
        {"Is it true that {subject} was {relation} {object}?", false},
        {"It is impossible for {subject} to be {relation} {object}. Am I right?", true},
    };
    t.relational[RelationCategory::verb_active] = {
        {"Is it true that {subject} {relation} {object}?", false},
        {"{subject} {relation} {object}. Please judge the truthfulness of this statement.", false},
    };
    t.temporal[mtl::Op::ap] = {"Did {nm} happen at year {t}?", "did {nm} happen"};
    t.temporal[mtl::Op::finally_] = {
        "Did 'Event' finally happen within the time frame of {interval} after the year {t}, where "
        "'Event' is defined as: {event}?",
        "did 'Event' finally happen within the time frame of {interval}, where 'Event' is defined "
        "as: {event}"};
    t.temporal[mtl::Op::globally] = {
        "Did 'Event' globally happen within the time frame of {interval} after the year {t}, where "
        "'Event' is defined as: {event}?",
        "did 'Event' globally happen within the time frame of {interval}, where 'Event' is defined "
        "as: {event}"};
    t.temporal[mtl::Op::next] = {
        "Did 'Event' happen in the next year of {t}, where 'Event' is defined as: {event}?",
        "did 'Event' happen in the next year, where 'Event' is defined as: {event}"};
    t.temporal[mtl::Op::until] = {
        "Did 'Event1' happen continuously until 'Event2' started, during the period {interval} "
        "after the year {t}, where 'Event1' is: {event1} and 'Event2' is: {event2}?",
        "did 'Event1' happen continuously until 'Event2' started, during the period {interval}, "
        "where 'Event1' is: {event1} and 'Event2' is: {event2}"};
    t.temporal[mtl::Op::and_] = {
        "Did both 'Event1' and 'Event2' happen at year {t}, where 'Event1' is: {event1} and "
        "'Event2' is: {event2}?",
        "did both 'Event1' and 'Event2' happen, where 'Event1' is: {event1} and 'Event2' is: "
        "{event2}"};
    t.temporal[mtl::Op::or_] = {
        "Did either 'Event1' or 'Event2' happen at year {t}, where 'Event1' is: {event1} and "
        "'Event2' is: {event2}?",
        "did either 'Event1' or 'Event2' happen, where 'Event1' is: {event1} and 'Event2' is: "
        "{event2}"};
    t.temporal[mtl::Op::not_] = {
        "Did 'Event' not happen at year {t}, where 'Event' is: {event}?",
        "did 'Event' not happen, where 'Event' is: {event}"};
    t.antonyms = {
        {"share similar", "have different"},
        {"share", "have totally different"},
        {"totally different", "the same"},
        {"appeared before", "never appeared before"},
        {"was", "was never"},
        {"is impossible", "is perfectly possible"},
        {"Is it true that", "Is it false that"},
    };
    return t;
}

inline TemplateSet TemplateSet::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
    TemplateSet t;
    for (const auto& [key, arr] : j.at("relational").items()) {
        auto cat = knowledge::parse_relation_category(key);
        if (!cat) throw Error("unknown relation category '" + key + "' in " + path.string());
        for (const auto& entry : arr)
            t.relational[*cat].push_back(
                {entry.at("text").get<std::string>(), entry.value("negated", false)});
    }
    static const std::map<std::string, mtl::Op> op_names = {
        {"ap", mtl::Op::ap},       {"finally", mtl::Op::finally_}, {"globally", mtl::Op::globally},
        {"until", mtl::Op::until}, {"next", mtl::Op::next},        {"not", mtl::Op::not_},
        {"and", mtl::Op::and_},    {"or", mtl::Op::or_}};
    for (const auto& [key, entry] : j.at("temporal").items()) {
        auto it = op_names.find(key);
        if (it == op_names.end())
            throw Error("unknown temporal operator '" + key + "' in " + path.string());
        t.temporal[it->second] = {entry.at("top").get<std::string>(),
                                  entry.at("nested").get<std::string>()};
    }
    for (const auto& pair : j.at("antonyms"))
        t.antonyms.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    for (auto cat : {RelationCategory::noun_phrase, RelationCategory::verb_passive,
                     RelationCategory::verb_active})
        if (t.relational[cat].empty())
            throw Error(std::string("template file is missing templates for '") +
                        knowledge::relation_category_name(cat) + "'");
    return t;
}

namespace detail {

inline std::string replace_all(std::string text, const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    while ((pos = text.find(key, pos)) != std::string::npos) {
        text.replace(pos, key.size(), value);
        pos += value.size();
    }
    return text;
}

inline bool word_boundary(const std::string& text, std::size_t pos, std::size_t len) {
    auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    if (pos > 0 && alnum(text[pos - 1])) return false;
    if (pos + len < text.size() && alnum(text[pos + len])) return false;
    return true;
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

}  // namespace detail

// First listed antonym phrase found at a word boundary, replaced once.
inline std::optional<std::string> mutate_question(const std::string& question,
                                                  const TemplateSet& templates) {
    for (const auto& [from, to] : templates.antonyms) {
        std::size_t pos = 0;
        while ((pos = question.find(from, pos)) != std::string::npos) {
            if (detail::word_boundary(question, pos, from.size())) {
                std::string mutated = question;
                mutated.replace(pos, from.size(), to);
                return mutated;
            }
            ++pos;
        }
    }
    return std::nullopt;
}

inline std::string relation_surface(const std::string& nm) {
    std::string base = nm.rfind("not_", 0) == 0 ? nm.substr(4) : nm;
    for (char& c : base)
        if (c == '_') c = ' ';
    return base;
}

inline std::string entity_surface(const FactStore& store, const std::string& name) {
    if (const knowledge::Entity* e = store.entity(name)) return e->surface;
    return knowledge::sentence_case(name);
}

// Relation metadata for a possibly derived predicate name: strip the negation
// prefix, then try the inverse naming back-map, then the "_inv" suffix.
inline const knowledge::RelationMeta* resolve_relation(const FactStore& store,
                                                       const std::string& nm) {
    std::string base = nm.rfind("not_", 0) == 0 ? nm.substr(4) : nm;
    if (const auto* m = store.relation(base)) return m;
    for (const auto& [rel, meta] : store.relations())
        if (derivation::inverse_name(rel) == base) return &meta;
    if (base.size() > 4 && base.ends_with("_inv"))
        if (const auto* m = store.relation(base.substr(0, base.size() - 4))) return m;
    return nullptr;
}

inline std::vector<QaCase> gen_relational_cases(const FactStore& store,
                                                const std::vector<DerivedFact>& derived,
                                                const TemplateSet& templates, bool mutate,
                                                std::uint64_t seed) {
    std::vector<QaCase> out;
    for (std::size_t i = 0; i < derived.size(); ++i) {
        const DerivedFact& d = derived[i];
        const knowledge::RelationMeta* meta = resolve_relation(store, d.fact.nm);
        if (!meta)
            throw Error("no relation category known for derived predicate '" + d.fact.nm + "'");
        auto tmpl_it = templates.relational.find(meta->category);
        if (tmpl_it == templates.relational.end() || tmpl_it->second.empty())
            throw Error(std::string("no question template for relation category '") +
                        knowledge::relation_category_name(meta->category) + "'");

        std::mt19937_64 rng(detail::mix64(seed, i));
        std::uniform_int_distribution<std::size_t> pick(0, tmpl_it->second.size() - 1);
        const QTemplate& tmpl = tmpl_it->second[pick(rng)];

        bool fact_holds = d.fact.nm.rfind("not_", 0) != 0;
        QaCase c;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "rel-%05zu", i);
        c.id = idbuf;
        c.kind = Kind::relational;
        c.question = detail::replace_all(tmpl.text, "{subject}", entity_surface(store, d.fact.subject));
        c.question = detail::replace_all(c.question, "{object}", entity_surface(store, d.fact.object));
        c.question = detail::replace_all(c.question, "{relation}", relation_surface(d.fact.nm));
        c.answer = (fact_holds != tmpl.negated) ? Answer::yes : Answer::no;
        c.rule = derivation::rule_name(d.rule);
        c.parents = d.parents;
        if (const knowledge::Entity* e = store.entity(d.fact.subject))
            c.domain = knowledge::category_name(e->category);
        else if (const knowledge::Entity* e2 = store.entity(d.fact.object))
            c.domain = knowledge::category_name(e2->category);

        if (d.rule == derivation::Rule::neg) {
            std::string base = d.fact.nm.substr(4);
            for (const Fact& f : store.facts_of(base))
                if (f.subject == d.fact.subject || f.object == d.fact.object ||
                    f.subject == d.fact.object || f.object == d.fact.subject)
                    c.ground_facts.push_back(f);
        } else {
            c.ground_facts = d.parents;
            c.ground_facts.push_back(d.fact);
        }

        std::optional<std::string> mutated;
        if (mutate) mutated = mutate_question(c.question, templates);
        out.push_back(c);
        if (mutated) {
            QaCase m = c;
            m.id += "-mut";
            m.question = *mutated;
            m.answer = c.answer == Answer::yes ? Answer::no : Answer::yes;
            out.push_back(std::move(m));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Temporal cases

namespace detail {

inline std::string interval_text(const mtl::TimeBound& b) {
    return "[" + std::to_string(b.lo) + "," + std::to_string(b.hi) + "]";
}

inline std::string mtl2nl_rec(const mtl::Formula& f, Year t, const TemplateSet& templates,
                              bool top) {
    auto it = templates.temporal.find(f.op());
    if (it == templates.temporal.end()) throw Error("no temporal template for operator");
    std::string text = top ? it->second.top : it->second.nested;
    text = replace_all(text, "{t}", std::to_string(t));
    switch (f.op()) {
        case mtl::Op::ap: text = replace_all(text, "{nm}", f.name()); break;
        case mtl::Op::until:
        case mtl::Op::and_:
        case mtl::Op::or_:
            text = replace_all(text, "{interval}", interval_text(f.bound()));
            text = replace_all(text, "{event1}", mtl2nl_rec(*f.lhs(), t, templates, false));
            text = replace_all(text, "{event2}", mtl2nl_rec(*f.rhs(), t, templates, false));
            break;
        default:
            text = replace_all(text, "{interval}", interval_text(f.bound()));
            text = replace_all(text, "{event}", mtl2nl_rec(*f.lhs(), t, templates, false));
            break;
    }
    return text;
}

}  // namespace detail

inline std::string mtl2nl(const mtl::Formula& f, Year t, const TemplateSet& templates) {
    return detail::mtl2nl_rec(f, t, templates, true);
}

inline QaCase make_temporal_case(const mtl::History& h, const mtl::Formula& f, Year t,
                                 const TemplateSet& templates, std::string id,
                                 const FactStore* store = nullptr) {
    QaCase c;
    c.id = std::move(id);
    c.kind = Kind::temporal;
    c.formula = mtl::format(f);
    c.t = t;
    c.ground_set = intervals::compile_mtl(h, f, {intervals::UntilMode::exact});
    c.answer = c.ground_set.contains(t) ? Answer::yes : Answer::no;
    c.question = mtl2nl(f, t, templates);
    std::set<std::string> events;
    f.collect_events(events);
    for (const std::string& name : events) {
        auto it = h.events.find(name);
        if (it == h.events.end()) throw Error("unknown event '" + name + "'");
        for (const intervals::Span& sp : it->second) {
            c.ground_facts.push_back(Fact{"start", name, std::to_string(sp.lo)});
            c.ground_facts.push_back(Fact{"end", name, std::to_string(sp.hi)});
        }
        if (c.domain.empty() && store)
            if (const knowledge::Entity* e = store->entity(name))
                c.domain = knowledge::category_name(e->category);
    }
    return c;
}

struct TemporalGenConfig {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    mtl::SamplerConfig sampler;
    double balance = 0.5;
    int resample_budget = 20;
};

inline std::vector<QaCase> gen_temporal_cases(const mtl::History& h, const TemporalGenConfig& cfg,
                                              const TemplateSet& templates,
                                              const FactStore* store = nullptr) {
    std::vector<std::string> events;
    for (const auto& [name, spans] : h.events) {
        bool ok = !name.empty() && std::islower(static_cast<unsigned char>(name[0]));
        for (char ch : name)
            ok = ok && (std::islower(static_cast<unsigned char>(ch)) ||
                        std::isdigit(static_cast<unsigned char>(ch)) || ch == '_');
        if (ok) events.push_back(name);
    }
    if (events.empty()) throw Error("history has no events usable as atomic propositions");

    // Yes/No targets as a shuffled quota so the requested balance is exact.
    std::size_t yes_quota =
        static_cast<std::size_t>(std::llround(cfg.balance * static_cast<double>(cfg.n)));
    std::vector<bool> want_yes(cfg.n, false);
    for (std::size_t i = 0; i < std::min(yes_quota, cfg.n); ++i) want_yes[i] = true;
    std::mt19937_64 slot_rng(detail::mix64(cfg.seed, 0x5107));
    std::shuffle(want_yes.begin(), want_yes.end(), slot_rng);

    const IntervalSet universe_set = IntervalSet::single(h.universe.lo, h.universe.hi);
    std::vector<QaCase> out;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        bool made = false;
        for (int attempt = 0; attempt < cfg.resample_budget && !made; ++attempt) {
            std::uint64_t sub_seed = detail::mix64(cfg.seed, i * 1000 + attempt);
            mtl::FormulaPtr f = mtl::sample_formula(sub_seed, events, cfg.sampler);
            IntervalSet ground = intervals::compile_mtl(h, *f, {intervals::UntilMode::exact});
            if (ground.empty() || ground == universe_set) continue;
            IntervalSet pool = want_yes[i] ? ground : intervals::difference(universe_set, ground);
            std::mt19937_64 rng(detail::mix64(sub_seed, 0x7a11));
            std::uniform_int_distribution<Year> pick(0, pool.count() - 1);
            Year t = pool.nth_point(pick(rng));
            char idbuf[32];
            std::snprintf(idbuf, sizeof idbuf, "tmp-%05zu", i);
            out.push_back(make_temporal_case(h, *f, t, templates, idbuf, store));
            made = true;
        }
        if (!made)
            throw Error("could not generate temporal case " + std::to_string(i) + " within " +
                        std::to_string(cfg.resample_budget) + " attempts");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts

inline std::string render_prompt(const QaCase& c) {
    std::string out;
    if (!c.context_docs.empty()) {
        out += "Context:\n";
        for (const std::string& doc : c.context_docs) out += doc + "\n";
        out += "\n";
    }
    out += "Instruction: Answer the question with your knowledge and reasoning power.\n";
    if (c.kind == Kind::relational) {
        out += "Query: Given the question: " + c.question +
               ", please provide an answer with your knowledge and reasoning power. Think of it "
               "step by step with a human-like reasoning process. After giving the answer, list "
               "the knowledge used in your reasoning process in the form of declarative sentences "
               "and point by point. The answer must contain 'Yes', 'No' or 'I don't know' at the "
               "beginning.\n";
    } else {
        out += "Query: Given the question: " + c.question +
               ", please provide an answer with your knowledge and reasoning power upon metric "
               "temporal logic. Think it step by step with a human-like reasoning process. After "
               "giving the answer, list the evidence from your temporal reasoning in the form of "
               "declarative sentences and point by point. The answer must contain 'Yes', 'No' or "
               "'I don't know' at the beginning.\n";
    }
    return out;
}

inline QaCase attach_context(QaCase c, std::vector<std::string> docs) {
    if (docs.empty()) throw Error("attach_context requires at least one document");
    c.context_docs = std::move(docs);
    return c;
}

// ---------------------------------------------------------------------------
// Serialization

inline json to_json(const QaCase& c) {
    json j{{"id", c.id},
           {"kind", c.kind == Kind::relational ? "relational" : "temporal"},
           {"question", c.question},
           {"answer", c.answer == Answer::yes ? "Yes" : "No"},
           {"domain", c.domain}};
    auto facts_json = [](const std::vector<Fact>& facts) {
        json arr = json::array();
        for (const Fact& f : facts)
            arr.push_back({{"nm", f.nm}, {"subject", f.subject}, {"object", f.object}});
        return arr;
    };
    if (c.kind == Kind::temporal) {
        j["formula"] = c.formula;
        j["t"] = c.t;
        j["ground_set"] = c.ground_set.to_json();
    } else {
        j["rule"] = c.rule;
        j["parents"] = facts_json(c.parents);
    }
    j["ground_facts"] = facts_json(c.ground_facts);
    if (!c.context_docs.empty()) j["context_docs"] = c.context_docs;
    return j;
}

inline QaCase case_from_json(const json& j) {
    QaCase c;
    c.id = j.at("id").get<std::string>();
    c.kind = j.at("kind").get<std::string>() == "temporal" ? Kind::temporal : Kind::relational;
    c.question = j.at("question").get<std::string>();
    c.answer = j.at("answer").get<std::string>() == "Yes" ? Answer::yes : Answer::no;
    c.domain = j.value("domain", "");
    auto read_facts = [](const json& arr) {
        std::vector<Fact> out;
        for (const auto& f : arr)
            out.push_back(Fact{f.at("nm").get<std::string>(), f.at("subject").get<std::string>(),
                               f.at("object").get<std::string>()});
        return out;
    };
    if (j.contains("formula")) c.formula = j["formula"].get<std::string>();
    if (j.contains("t")) c.t = j["t"].get<Year>();
    if (j.contains("ground_set")) c.ground_set = IntervalSet::from_json(j["ground_set"]);
    if (j.contains("rule")) c.rule = j["rule"].get<std::string>();
    if (j.contains("parents")) c.parents = read_facts(j["parents"]);
    if (j.contains("ground_facts")) c.ground_facts = read_facts(j["ground_facts"]);
    if (j.contains("context_docs"))
        c.context_docs = j["context_docs"].get<std::vector<std::string>>();
    return c;
}

inline void write_cases(const std::filesystem::path& path, const std::vector<QaCase>& cases,
                        const std::string& config_hash = "") {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    if (!config_hash.empty()) out << json{{"config_hash", config_hash}}.dump() << "\n";
    for (const QaCase& c : cases) out << to_json(c).dump() << "\n";
}

inline std::vector<QaCase> read_cases(const std::filesystem::path& path) {
    std::vector<QaCase> out;
    knowledge::detail::for_each_jsonl(path, [&](const json& j) {
        if (!j.contains("id")) return;  // leading config-hash record
        out.push_back(case_from_json(j));
    });
    return out;
}

}  // namespace fchprobe::casegen
