#pragma once

// Response evaluation: parse the answer, extract relation triples from the
// reasoning list, build semantic graphs, score edge/node Jaccard similarity
// over an equivalence quotient, and classify each response as CO/EI/EK/OL.

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <regex>
#include <shared_mutex>

#include "fchprobe/casegen.hpp"
#include "fchprobe/knowledge.hpp"

namespace fchprobe::evaluation {

using knowledge::Fact;
using nlohmann::json;

enum class AnswerClass { yes, no, refusal };

inline const char* answer_class_name(AnswerClass a) {
    switch (a) {
        case AnswerClass::yes: return "Yes";
        case AnswerClass::no: return "No";
        default: return "Refusal";
    }
}

inline const std::vector<std::string>& default_refusal_patterns() {
    static const std::vector<std::string> patterns = {"i don't know", "i do not know"};
    return patterns;
}

// Scan the leading segment for the first whole-word occurrence of yes/no or a
// refusal phrase; earliest position wins, longer match breaking ties.
inline AnswerClass extract_answer(const std::string& raw_text,
                                  const std::vector<std::string>& refusal_patterns =
                                      default_refusal_patterns()) {
    constexpr std::size_t kWindow = 200;
    std::string head = raw_text.substr(0, kWindow);
    for (char& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    auto find_word = [&](const std::string& needle) -> std::size_t {
        std::size_t pos = 0;
        auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
        while ((pos = head.find(needle, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !alnum(head[pos - 1]);
            std::size_t end = pos + needle.size();
            bool right_ok = end >= head.size() || !alnum(head[end]);
            if (left_ok && right_ok) return pos;
            ++pos;
        }
        return std::string::npos;
    };

    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    AnswerClass best = AnswerClass::refusal;
    auto consider = [&](const std::string& needle, AnswerClass cls) {
        std::size_t pos = find_word(needle);
        if (pos == std::string::npos) return;
        if (pos < best_pos || (pos == best_pos && needle.size() > best_len)) {
            best_pos = pos;
            best_len = needle.size();
            best = cls;
        }
    };
    for (const std::string& p : refusal_patterns) consider(p, AnswerClass::refusal);
    consider("yes", AnswerClass::yes);
    consider("no", AnswerClass::no);
    return best_pos == std::string::npos ? AnswerClass::refusal : best;
}

struct LlmResponse {
    std::string case_id;
    std::string raw_text;
    AnswerClass answer = AnswerClass::refusal;
    std::string reasoning_text;
};

inline LlmResponse parse_response(std::string case_id, std::string raw_text,
                                  const std::vector<std::string>& refusal_patterns =
                                      default_refusal_patterns()) {
    LlmResponse r;
    r.case_id = std::move(case_id);
    r.answer = extract_answer(raw_text, refusal_patterns);
    r.raw_text = std::move(raw_text);
    r.reasoning_text = r.raw_text;
    return r;
}

// ---------------------------------------------------------------------------
// Triple extraction

struct Triple {
    std::string subject;
    std::string relation;
    std::string object;

    auto operator<=>(const Triple&) const = default;
};

struct ExtractorConfig {
    // Optional external command: reasoning text on stdin, triple JSONL
    // ({"subject","relation","object"} per line) on stdout.
    std::optional<std::string> command;
};

namespace detail {

inline std::string snake(const std::string& phrase) { return knowledge::normalize_name(phrase); }

inline std::optional<Triple> match_sentence(const std::string& sentence) {
    static const std::regex structured(R"(^(.+?)\s+--\s+(.+?)\s+--\s+(.+?)$)");
    static const std::regex shared_noun(
        R"(^(.+?)\s+and\s+(.+?)\s+(?:share|shares|shared|have|had)\s+(.+?)$)");
    static const std::regex passive_by(R"(^(.+?)\s+(?:is|was|are|were)\s+(.+?)\s+by\s+(.+?)$)");
    static const std::regex passive_prep(
        R"(^(.+?)\s+(?:is|was|are|were)\s+(\w+)\s+(in|at|on|from|of|to)\s+(.+?)$)");
    static const std::regex active_verb(R"(^(.+?)\s+([a-z]+(?:s|ed))\s+(.+?)$)");
    static const std::set<std::string> auxiliaries = {"was", "is",  "as",   "has",
                                                      "does", "its", "this", "lacks"};
    std::smatch m;
    if (std::regex_match(sentence, m, structured))
        return Triple{snake(m[1]), snake(m[2]), snake(m[3])};
    if (std::regex_match(sentence, m, shared_noun))
        return Triple{snake(m[1]), snake(m[3]), snake(m[2])};
    if (std::regex_match(sentence, m, passive_by))
        return Triple{snake(m[1]), snake(m[2]) + "_by", snake(m[3])};
    if (std::regex_match(sentence, m, passive_prep))
        return Triple{snake(m[1]), snake(m[2]) + "_" + snake(m[3]), snake(m[4])};
    if (std::regex_match(sentence, m, active_verb) && !auxiliaries.count(m[2]))
        return Triple{snake(m[1]), snake(m[2]), snake(m[3])};
    return std::nullopt;
}

// Returns the item text when the line is part of the point-by-point list.
inline std::optional<std::string> list_item(const std::string& line) {
    static const std::regex marker(R"(^\s*(?:\d+[\.\)]\s+|[-*•]\s+)(.*)$)");
    std::smatch m;
    if (!std::regex_match(line, m, marker)) return std::nullopt;
    std::string item = m[1];
    while (!item.empty() && (item.back() == '.' || item.back() == ' ' || item.back() == '\r'))
        item.pop_back();
    if (item.empty()) return std::nullopt;
    return item;
}

inline std::vector<Triple> run_adapter(const std::string& command, const std::string& text) {
    namespace fs = std::filesystem;
    fs::path tmp = fs::temp_directory_path() /
                   ("fchprobe-extract-" + std::to_string(::getpid()) + "-" +
                    std::to_string(reinterpret_cast<std::uintptr_t>(&text)) + ".txt");
    {
        std::ofstream out(tmp);
        out << text;
    }
    std::string cmd = command + " < " + tmp.string();
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        fs::remove(tmp);
        throw Error("failed to launch extractor adapter: " + command);
    }
    std::string output;
    char buf[4096];
    std::size_t n;
    while ((n = ::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
    int status = ::pclose(pipe);
    fs::remove(tmp);
    if (status != 0) throw Error("extractor adapter exited with status " + std::to_string(status));

    std::vector<Triple> out;
    std::size_t start = 0;
    while (start < output.size()) {
        std::size_t end = output.find('\n', start);
        if (end == std::string::npos) end = output.size();
        std::string line = output.substr(start, end - start);
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line);
        out.push_back(Triple{snake(j.at("subject").get<std::string>()),
                             snake(j.at("relation").get<std::string>()),
                             snake(j.at("object").get<std::string>())});
    }
    return out;
}

}  // namespace detail

inline std::vector<Triple> extract_triples(const std::string& reasoning_text,
                                           const ExtractorConfig& config = {},
                                           std::vector<std::string>* warnings = nullptr) {
    if (config.command) {
        try {
            std::vector<Triple> out = detail::run_adapter(*config.command, reasoning_text);
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            return out;
        } catch (const Error& e) {
            if (warnings) warnings->push_back(std::string(e.what()) + "; using default extractor");
        }
    }
    std::vector<Triple> out;
    std::size_t start = 0;
    while (start <= reasoning_text.size()) {
        std::size_t end = reasoning_text.find('\n', start);
        if (end == std::string::npos) end = reasoning_text.size();
        std::string line = reasoning_text.substr(start, end - start);
        start = end + 1;
        if (auto item = detail::list_item(line))
            if (auto triple = detail::match_sentence(*item)) out.push_back(std::move(*triple));
        if (end == reasoning_text.size()) break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Semantic graphs

struct SemGraph {
    std::set<std::string> nodes;
    std::set<Triple> edges;
};

inline SemGraph build_graph(const std::vector<Triple>& triples) {
    SemGraph g;
    for (const Triple& t : triples) {
        g.nodes.insert(t.subject);
        g.nodes.insert(t.object);
        g.edges.insert(t);
    }
    return g;
}

inline SemGraph graph_from_facts(const std::vector<Fact>& facts) {
    std::vector<Triple> triples;
    triples.reserve(facts.size());
    for (const Fact& f : facts) triples.push_back(Triple{f.subject, f.nm, f.object});
    return build_graph(triples);
}

// ---------------------------------------------------------------------------
// Equivalence provider and Jaccard similarity

// Term equivalence: exact normalized match, a synonym table, or an external
// embedding endpoint with a cosine threshold. Embedding scores are memoized
// per pair (concurrent reads, serialized inserts).
class EquivProvider {
public:
    using Embedder = std::function<std::vector<std::vector<double>>(const std::vector<std::string>&)>;

    static EquivProvider exact() { return EquivProvider{}; }

    static EquivProvider with_synonyms(const std::vector<std::pair<std::string, std::string>>& pairs) {
        EquivProvider p;
        for (const auto& [a, b] : pairs)
            p.synonyms_.insert({detail::snake(a), detail::snake(b)});
        return p;
    }

    static EquivProvider with_embedder(Embedder embedder, double threshold = 0.8,
                                       bool fallback_exact = true) {
        EquivProvider p;
        p.embedder_ = std::move(embedder);
        p.threshold_ = threshold;
        p.fallback_exact_ = fallback_exact;
        return p;
    }

    bool equiv(const std::string& raw_a, const std::string& raw_b) const {
        std::string a = detail::snake(raw_a);
        std::string b = detail::snake(raw_b);
        if (a == b) return true;
        if (synonyms_.count({a, b}) || synonyms_.count({b, a})) return true;
        if (!embedder_) return false;
        if (a > b) std::swap(a, b);
        {
            std::shared_lock lock(cache_mutex_);
            auto it = cache_.find({a, b});
            if (it != cache_.end()) return it->second;
        }
        bool result = false;
        try {
            auto vectors = embedder_({a, b});
            if (vectors.size() != 2) throw Error("embedding endpoint returned wrong vector count");
            result = cosine(vectors[0], vectors[1]) >= threshold_;
        } catch (const std::exception&) {
            if (!fallback_exact_) throw;
            result = false;  // exact fallback: distinct normalized strings differ
        }
        std::unique_lock lock(cache_mutex_);
        cache_.insert({{a, b}, result});
        return result;
    }

private:
    static double cosine(const std::vector<double>& x, const std::vector<double>& y) {
        if (x.size() != y.size() || x.empty()) throw Error("embedding vectors disagree in size");
        double dot = 0, nx = 0, ny = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        if (nx == 0 || ny == 0) return 0;
        return dot / (std::sqrt(nx) * std::sqrt(ny));
    }

    std::set<std::pair<std::string, std::string>> synonyms_;
    Embedder embedder_;
    double threshold_ = 0.8;
    bool fallback_exact_ = true;
    mutable std::shared_mutex cache_mutex_;
    mutable std::map<std::pair<std::string, std::string>, bool> cache_;

public:
    EquivProvider() = default;
    EquivProvider(const EquivProvider& o)
        : synonyms_(o.synonyms_), embedder_(o.embedder_), threshold_(o.threshold_),
          fallback_exact_(o.fallback_exact_) {}
    EquivProvider& operator=(const EquivProvider& o) {
        synonyms_ = o.synonyms_;
        embedder_ = o.embedder_;
        threshold_ = o.threshold_;
        fallback_exact_ = o.fallback_exact_;
        return *this;
    }
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = i;
    }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

// Edge and node Jaccard similarity over the equivalence quotient. Terms of
// both graphs (entities and relation names) are merged into classes; two
// edges coincide iff all three components fall into the same classes.
inline std::pair<double, double> similarity(const SemGraph& a, const SemGraph& b,
                                            const EquivProvider& equiv) {
    std::set<std::string> term_set;
    for (const SemGraph* g : {&a, &b}) {
        for (const std::string& n : g->nodes) term_set.insert(detail::snake(n));
        for (const Triple& e : g->edges) term_set.insert(detail::snake(e.relation));
    }
    std::vector<std::string> terms(term_set.begin(), term_set.end());
    detail::UnionFind uf(terms.size());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < terms.size(); ++i) index[terms[i]] = i;
    for (std::size_t i = 0; i < terms.size(); ++i)
        for (std::size_t j = i + 1; j < terms.size(); ++j)
            if (equiv.equiv(terms[i], terms[j])) uf.unite(i, j);

    auto rep = [&](const std::string& term) { return uf.find(index.at(detail::snake(term))); };
    auto node_classes = [&](const SemGraph& g) {
        std::set<std::size_t> out;
        for (const std::string& n : g.nodes) out.insert(rep(n));
        return out;
    };
    auto edge_classes = [&](const SemGraph& g) {
        std::set<std::array<std::size_t, 3>> out;
        for (const Triple& e : g.edges) out.insert({rep(e.subject), rep(e.relation), rep(e.object)});
        return out;
    };
    auto jaccard = [](const auto& x, const auto& y) {
        if (x.empty() && y.empty()) return 1.0;
        std::size_t inter = 0;
        for (const auto& item : x) inter += y.count(item);
        std::size_t uni = x.size() + y.size() - inter;
        return static_cast<double>(inter) / static_cast<double>(uni);
    };
    double s_e = jaccard(edge_classes(a), edge_classes(b));
    double s_n = jaccard(node_classes(a), node_classes(b));
    return {s_e, s_n};
}

// ---------------------------------------------------------------------------
// Classification

enum class Category { CO, EI, EK, OL };

inline const char* category_name(Category c) {
    switch (c) {
        case Category::CO: return "CO";
        case Category::EI: return "EI";
        case Category::EK: return "EK";
        default: return "OL";
    }
}

inline std::optional<Category> parse_verdict_category(const std::string& s) {
    for (Category c : {Category::CO, Category::EI, Category::EK, Category::OL})
        if (s == category_name(c)) return c;
    return std::nullopt;
}

struct Verdict {
    Category category = Category::CO;
    double s_e = 1.0;
    double s_n = 1.0;
};

struct ClassifyConfig {
    double theta_e = 0.8;
    double theta_n = 0.8;
    ExtractorConfig extractor;
};

// Branch order: refusal screens first, then OL (both below), EI (edges
// below), EK (nodes below), else CO. Thresholds compare with strict <.
inline Verdict classify(const LlmResponse& resp, const SemGraph& ground,
                        const ClassifyConfig& config, const EquivProvider& equiv) {
    if (resp.answer == AnswerClass::refusal) return Verdict{Category::CO, 1.0, 1.0};
    SemGraph response_graph = build_graph(extract_triples(resp.reasoning_text, config.extractor));
    auto [s_e, s_n] = similarity(response_graph, ground, equiv);
    Verdict v;
    v.s_e = s_e;
    v.s_n = s_n;
    if (s_e < config.theta_e && s_n < config.theta_n)
        v.category = Category::OL;
    else if (s_e < config.theta_e)
        v.category = Category::EI;
    else if (s_n < config.theta_n)
        v.category = Category::EK;
    else
        v.category = Category::CO;
    return v;
}

// ---------------------------------------------------------------------------
// Aggregate report

struct CategoryCounts {
    std::size_t co = 0, ei = 0, ek = 0, ol = 0;

    void add(Category c) {
        switch (c) {
            case Category::CO: ++co; break;
            case Category::EI: ++ei; break;
            case Category::EK: ++ek; break;
            case Category::OL: ++ol; break;
        }
    }
    std::size_t total() const { return co + ei + ek + ol; }
    double hallucination_rate() const {
        return total() == 0 ? 0.0 : static_cast<double>(ei + ek + ol) / static_cast<double>(total());
    }
};

struct Report {
    CategoryCounts overall;
    std::map<std::string, CategoryCounts> by_domain;
    std::map<std::string, CategoryCounts> by_rule;
    std::map<std::string, CategoryCounts> by_operator;

    json to_json(const std::string& config_hash = "") const {
        auto counts_json = [](const CategoryCounts& c) {
            return json{{"total", c.total()}, {"CO", c.co},         {"EI", c.ei},
                        {"EK", c.ek},         {"OL", c.ol},         {"hallucination_rate", c.hallucination_rate()}};
        };
        json j;
        if (!config_hash.empty()) j["config_hash"] = config_hash;
        j["overall"] = counts_json(overall);
        for (const auto& [k, v] : by_domain) j["by_domain"][k.empty() ? "(unknown)" : k] = counts_json(v);
        for (const auto& [k, v] : by_rule) j["by_rule"][k] = counts_json(v);
        for (const auto& [k, v] : by_operator) j["by_operator"][k] = counts_json(v);
        return j;
    }

    std::string to_csv(const std::string& config_hash = "") const {
        std::string out = "section,key,total,co,ei,ek,ol,hallucination_rate\n";
        auto row = [&](const std::string& section, const std::string& key,
                       const CategoryCounts& c) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", c.hallucination_rate());
            out += section + "," + (key.empty() ? "(unknown)" : key) + "," +
                   std::to_string(c.total()) + "," + std::to_string(c.co) + "," +
                   std::to_string(c.ei) + "," + std::to_string(c.ek) + "," + std::to_string(c.ol) +
                   "," + buf + "\n";
        };
        if (!config_hash.empty()) out += "config_hash," + config_hash + ",,,,,,\n";
        row("overall", "all", overall);
        for (const auto& [k, v] : by_domain) row("domain", k, v);
        for (const auto& [k, v] : by_rule) row("rule", k, v);
        for (const auto& [k, v] : by_operator) row("operator", k, v);
        return out;
    }
};

inline std::string outermost_operator(const std::string& formula_text) {
    mtl::FormulaPtr f = mtl::parse_mtl(formula_text);
    switch (f->op()) {
        case mtl::Op::ap: return "AP";
        case mtl::Op::finally_: return "F";
        case mtl::Op::globally: return "G";
        case mtl::Op::until: return "U";
        case mtl::Op::next: return "N";
        case mtl::Op::not_: return "Neg";
        case mtl::Op::and_: return "Conj";
        default: return "Disj";
    }
}

inline Report report(const std::vector<casegen::QaCase>& cases,
                     const std::vector<std::pair<std::string, Verdict>>& verdicts) {
    std::map<std::string, const casegen::QaCase*> by_id;
    for (const casegen::QaCase& c : cases) by_id[c.id] = &c;
    Report r;
    for (const auto& [case_id, verdict] : verdicts) {
        auto it = by_id.find(case_id);
        if (it == by_id.end()) throw Error("verdict references unknown case_id '" + case_id + "'");
        const casegen::QaCase& c = *it->second;
        r.overall.add(verdict.category);
        r.by_domain[c.domain].add(verdict.category);
        if (c.kind == casegen::Kind::relational)
            r.by_rule[c.rule].add(verdict.category);
        else
            r.by_operator[outermost_operator(c.formula)].add(verdict.category);
    }
    return r;
}

}  // namespace fchprobe::evaluation
