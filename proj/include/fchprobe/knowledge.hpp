#pragma once

// Ground-fact store: entities, relations, and three-element facts, loaded
// from JSONL files or a SPARQL endpoint. Stores are built once and frozen;
// all queries run against immutable state.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fchprobe/intervals.hpp"

namespace fchprobe::knowledge {

using nlohmann::json;

enum class EntityCategory {
    culture_arts,
    geography_places,
    health_fitness,
    history_events,
    people_self,
    mathematics_logic,
    natural_sciences,
    society_social,
    technology_applied,
};

inline constexpr std::array<const char*, 9> kCategoryNames = {
    "Culture/Arts",
    "Geography/Places",
    "Health/Fitness",
    "History/Events",
    "People/Self",
    "Mathematics/Logic",
    "Natural/Physical Sciences",
    "Society/Social Sciences",
    "Technology/Applied Sciences",
};

inline const char* category_name(EntityCategory c) {
    return kCategoryNames[static_cast<std::size_t>(c)];
}

inline std::optional<EntityCategory> parse_category(const std::string& s) {
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
        if (s == kCategoryNames[i]) return static_cast<EntityCategory>(i);
    return std::nullopt;
}

enum class RelationCategory { noun_phrase, verb_passive, verb_active };

inline const char* relation_category_name(RelationCategory c) {
    switch (c) {
        case RelationCategory::noun_phrase: return "noun";
        case RelationCategory::verb_passive: return "verb_passive";
        default: return "verb_active";
    }
}

inline std::optional<RelationCategory> parse_relation_category(const std::string& s) {
    if (s == "noun") return RelationCategory::noun_phrase;
    if (s == "verb_passive") return RelationCategory::verb_passive;
    if (s == "verb_active") return RelationCategory::verb_active;
    return std::nullopt;
}

enum class RelProp { neg, sym, trans, inverse };

inline const char* prop_name(RelProp p) {
    switch (p) {
        case RelProp::neg: return "neg";
        case RelProp::sym: return "sym";
        case RelProp::trans: return "trans";
        default: return "inverse";
    }
}

inline std::optional<RelProp> parse_prop(const std::string& s) {
    if (s == "neg") return RelProp::neg;
    if (s == "sym") return RelProp::sym;
    if (s == "trans") return RelProp::trans;
    if (s == "inverse") return RelProp::inverse;
    return std::nullopt;
}

struct Entity {
    std::string name;
    EntityCategory category = EntityCategory::history_events;
    std::string surface;  // display form; defaults to sentence-cased name

    bool operator==(const Entity&) const = default;
};

struct Fact {
    std::string nm;
    std::string subject;
    std::string object;

    auto operator<=>(const Fact&) const = default;
};

struct RelationMeta {
    std::string nm;
    RelationCategory category = RelationCategory::noun_phrase;
    std::set<RelProp> props;

    bool has(RelProp p) const { return props.count(p) > 0; }
    bool operator==(const RelationMeta&) const = default;
};

struct TimestampedEvent {
    std::string name;
    Year start = 0;
    Year end = 0;

    bool operator==(const TimestampedEvent&) const = default;
};

// Lowercase, whitespace to underscores. Apostrophes, digits and hyphens pass
// through (entity constants keep their punctuation).
inline std::string normalize_name(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (std::isspace(static_cast<unsigned char>(c)))
            out += '_';
        else
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

inline std::string sentence_case(const std::string& name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) out += (c == '_') ? ' ' : c;
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

inline bool is_year_object(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

class FactStore;

class FactStoreBuilder {
public:
    void add_entity(Entity e) {
        e.name = normalize_name(e.name);
        if (e.name.empty()) throw Error("entity name must be non-empty");
        if (e.surface.empty()) e.surface = sentence_case(e.name);
        auto it = entities_.find(e.name);
        if (it != entities_.end()) {
            if (it->second.category != e.category)
                throw Error("entity '" + e.name + "' declared with conflicting categories");
            return;
        }
        entities_.emplace(e.name, std::move(e));
    }

    void add_relation(RelationMeta m) {
        m.nm = normalize_name(m.nm);
        validate_relation(m);
        auto it = relations_.find(m.nm);
        if (it != relations_.end()) {
            if (!(it->second == m))
                throw Error("relation '" + m.nm + "' declared twice with different metadata");
            return;
        }
        relations_.emplace(m.nm, std::move(m));
    }

    void add_fact(Fact f) {
        f.nm = normalize_name(f.nm);
        f.subject = normalize_name(f.subject);
        f.object = normalize_name(f.object);
        validate_fact(f);
        facts_.insert(std::move(f));
    }

    FactStore freeze() const;

private:
    static void validate_relation(const RelationMeta& m) {
        if (m.nm.empty()) throw Error("relation name must be non-empty");
        if (m.category == RelationCategory::noun_phrase) {
            if (m.has(RelProp::inverse))
                throw Error("noun-phrase relation '" + m.nm + "' cannot carry the inverse property");
        } else if (m.has(RelProp::sym) || m.has(RelProp::trans)) {
            throw Error("verb-phrase relation '" + m.nm +
                        "' can only carry the neg and inverse properties");
        }
    }

    static void validate_fact(const Fact& f) {
        if (f.nm.empty() || f.subject.empty()) throw Error("fact nm and subject must be non-empty");
        if (!std::islower(static_cast<unsigned char>(f.nm[0])))
            throw Error("fact name '" + f.nm + "' must begin with a lowercase letter");
        if (f.nm == "start" || f.nm == "end") {
            if (!is_year_object(f.object) || std::stoll(f.object) < 1)
                throw Error(f.nm + "(" + f.subject + ", " + f.object +
                            "): object must be an integer year >= 1");
        }
    }

    std::set<Fact> facts_;
    std::map<std::string, Entity> entities_;
    std::map<std::string, RelationMeta> relations_;

    friend class FactStore;
};

class FactStore {
public:
    FactStore() = default;

    const std::vector<Fact>& facts() const { return facts_; }
    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::map<std::string, RelationMeta>& relations() const { return relations_; }

    bool has_fact(const Fact& f) const {
        return std::binary_search(facts_.begin(), facts_.end(), f);
    }

    const RelationMeta* relation(const std::string& nm) const {
        auto it = relations_.find(nm);
        return it == relations_.end() ? nullptr : &it->second;
    }

    const Entity* entity(const std::string& name) const {
        auto it = entities_.find(name);
        return it == entities_.end() ? nullptr : &it->second;
    }

    bool has_predicate(const std::string& nm) const {
        if (relations_.count(nm)) return true;
        auto [lo, hi] = nm_range(nm);
        return lo != hi;
    }

    // Facts of one predicate, in sorted order.
    std::vector<Fact> facts_of(const std::string& nm) const {
        auto [lo, hi] = nm_range(nm);
        return {facts_.begin() + lo, facts_.begin() + hi};
    }

private:
    std::pair<std::ptrdiff_t, std::ptrdiff_t> nm_range(const std::string& nm) const {
        Fact probe{nm, "", ""};
        auto lo = std::lower_bound(facts_.begin(), facts_.end(), probe,
                                   [](const Fact& a, const Fact& b) { return a.nm < b.nm; });
        auto hi = std::upper_bound(facts_.begin(), facts_.end(), probe,
                                   [](const Fact& a, const Fact& b) { return a.nm < b.nm; });
        return {lo - facts_.begin(), hi - facts_.begin()};
    }

    std::vector<Fact> facts_;
    std::map<std::string, Entity> entities_;
    std::map<std::string, RelationMeta> relations_;

    friend class FactStoreBuilder;
};

inline FactStore FactStoreBuilder::freeze() const {
    for (const Fact& f : facts_) {
        if (f.nm == "start" || f.nm == "end") continue;
        if (!relations_.count(f.nm))
            throw Error("fact predicate '" + f.nm + "' has no relation metadata");
    }
    FactStore s;
    s.facts_.assign(facts_.begin(), facts_.end());
    s.entities_ = entities_;
    s.relations_ = relations_;
    return s;
}

// ---------------------------------------------------------------------------
// JSONL ingestion

namespace detail {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        try {
            fn(j);
        } catch (const Error& e) {
            throw Error(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const json::exception& e) {
            throw Error(path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

}  // namespace detail

inline FactStore load_store(const std::filesystem::path& facts_path,
                            const std::filesystem::path& entities_path,
                            const std::filesystem::path& relations_path) {
    FactStoreBuilder b;
    detail::for_each_jsonl(entities_path, [&](const json& j) {
        Entity e;
        e.name = j.at("name").get<std::string>();
        auto cat = parse_category(j.at("category").get<std::string>());
        if (!cat) throw Error("unknown entity category '" + j.at("category").get<std::string>() + "'");
        e.category = *cat;
        if (j.contains("surface")) e.surface = j.at("surface").get<std::string>();
        b.add_entity(std::move(e));
    });
    detail::for_each_jsonl(relations_path, [&](const json& j) {
        RelationMeta m;
        m.nm = j.at("nm").get<std::string>();
        auto cat = parse_relation_category(j.at("category").get<std::string>());
        if (!cat)
            throw Error("unknown relation category '" + j.at("category").get<std::string>() + "'");
        m.category = *cat;
        for (const auto& p : j.at("props")) {
            auto prop = parse_prop(p.get<std::string>());
            if (!prop) throw Error("unknown relation property '" + p.get<std::string>() + "'");
            m.props.insert(*prop);
        }
        b.add_relation(std::move(m));
    });
    detail::for_each_jsonl(facts_path, [&](const json& j) {
        b.add_fact(Fact{j.at("nm").get<std::string>(), j.at("subject").get<std::string>(),
                        j.at("object").get<std::string>()});
    });
    return b.freeze();
}

inline void save_store(const FactStore& store, const std::filesystem::path& facts_path,
                       const std::filesystem::path& entities_path,
                       const std::filesystem::path& relations_path) {
    {
        std::ofstream out(facts_path);
        for (const Fact& f : store.facts())
            out << json{{"nm", f.nm}, {"subject", f.subject}, {"object", f.object}}.dump() << "\n";
    }
    {
        std::ofstream out(entities_path);
        for (const auto& [name, e] : store.entities()) {
            json j{{"name", name}, {"category", category_name(e.category)}};
            if (e.surface != sentence_case(name)) j["surface"] = e.surface;
            out << j.dump() << "\n";
        }
    }
    {
        std::ofstream out(relations_path);
        for (const auto& [nm, m] : store.relations()) {
            json props = json::array();
            for (RelProp p : m.props) props.push_back(prop_name(p));
            out << json{{"nm", nm},
                        {"category", relation_category_name(m.category)},
                        {"props", props}}
                       .dump()
                << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Queries

inline std::vector<Fact> query(const FactStore& store, const std::optional<std::string>& entity,
                               const std::optional<std::string>& nm) {
    std::vector<Fact> out;
    auto matches = [&](const Fact& f) {
        if (nm && f.nm != *nm) return false;
        if (entity && f.subject != *entity && f.object != *entity) return false;
        return true;
    };
    if (nm) {
        for (const Fact& f : store.facts_of(*nm))
            if (matches(f)) out.push_back(f);
    } else {
        for (const Fact& f : store.facts())
            if (matches(f)) out.push_back(f);
    }
    return out;  // store order is already (nm, subject, object)
}

inline std::vector<Fact> extract_ground_facts(const FactStore& store, EntityCategory entity_category,
                                              RelationCategory relation_category) {
    std::set<Fact> seen;
    for (const auto& [name, e] : store.entities()) {
        if (e.category != entity_category) continue;
        for (const auto& [nm, m] : store.relations()) {
            if (m.category != relation_category) continue;
            for (Fact& f : query(store, name, nm)) seen.insert(std::move(f));
        }
    }
    return {seen.begin(), seen.end()};
}

// One event per entity carrying both start and end facts with start <= end.
// Conflicting duplicates resolve first-wins; reversed bounds are skipped.
// Both cases emit a warning.
inline std::vector<TimestampedEvent> timestamp_events(const FactStore& store,
                                                      std::vector<std::string>* warnings = nullptr) {
    auto warn = [&](const std::string& msg) {
        if (warnings) warnings->push_back(msg);
    };
    std::map<std::string, Year> starts, ends;
    for (const Fact& f : store.facts_of("start")) {
        if (!starts.emplace(f.subject, std::stoll(f.object)).second)
            warn("duplicate start fact for '" + f.subject + "', keeping the first");
    }
    for (const Fact& f : store.facts_of("end")) {
        if (!ends.emplace(f.subject, std::stoll(f.object)).second)
            warn("duplicate end fact for '" + f.subject + "', keeping the first");
    }
    std::vector<TimestampedEvent> out;
    for (const auto& [name, start] : starts) {
        auto it = ends.find(name);
        if (it == ends.end()) continue;
        if (start > it->second) {
            warn("event '" + name + "' has start " + std::to_string(start) + " after end " +
                 std::to_string(it->second) + ", skipping");
            continue;
        }
        out.push_back({name, start, it->second});
    }
    return out;
}

// ---------------------------------------------------------------------------
// SPARQL client

struct SparqlColumnMapping {
    std::string nm = "nm";
    std::string subject = "subject";
    std::string object = "object";
};

// Declared here, defined in net.hpp to keep the HTTP dependency optional.
std::vector<Fact> fetch_sparql(const std::string& endpoint_url, const std::string& query_text,
                               const SparqlColumnMapping& mapping = {});

inline std::vector<Fact> parse_sparql_results(const std::string& body,
                                              const SparqlColumnMapping& mapping) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw Error(std::string("malformed SPARQL response: ") + e.what());
    }
    if (!j.contains("results") || !j["results"].contains("bindings"))
        throw Error("malformed SPARQL response: missing results.bindings");
    std::vector<Fact> out;
    for (const auto& row : j["results"]["bindings"]) {
        auto cell = [&](const std::string& col) -> std::string {
            if (!row.contains(col) || !row[col].contains("value"))
                throw Error("SPARQL row is missing mapped column '" + col + "'");
            return row[col]["value"].get<std::string>();
        };
        out.push_back(Fact{normalize_name(cell(mapping.nm)), normalize_name(cell(mapping.subject)),
                           normalize_name(cell(mapping.object))});
    }
    return out;
}

}  // namespace fchprobe::knowledge
