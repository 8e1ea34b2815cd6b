// Pipeline driver: ingest a knowledge base, derive facts, generate Q&A cases,
// query an LLM endpoint (or the mock backend), evaluate responses, aggregate
// reports, and run the self-verification suites.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "fchprobe/casegen.hpp"
#include "fchprobe/derivation.hpp"
#include "fchprobe/evaluation.hpp"
#include "fchprobe/knowledge.hpp"
#include "fchprobe/llmclient.hpp"
#include "fchprobe/net.hpp"
#include "fchprobe/selftest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fchprobe;

namespace {

struct RunConfig {
    std::uint64_t seed = 0;
    intervals::Span universe{1, 2024};
    double theta_e = 0.8;
    double theta_n = 0.8;
    std::string until_mode = "paper";
    double balance = 0.5;
    int max_depth = 2;
    Year max_bound = 40;

    json to_json() const {
        return {{"seed", seed},
                {"universe", {universe.lo, universe.hi}},
                {"theta_e", theta_e},
                {"theta_n", theta_n},
                {"until_mode", until_mode},
                {"balance", balance},
                {"sampler", {{"max_depth", max_depth}, {"max_bound", max_bound}}}};
    }

    void apply_file(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config file " + path.string());
        json j = json::parse(in);
        if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
        if (j.contains("universe"))
            universe = {j["universe"][0].get<Year>(), j["universe"][1].get<Year>()};
        if (j.contains("theta_e")) theta_e = j["theta_e"].get<double>();
        if (j.contains("theta_n")) theta_n = j["theta_n"].get<double>();
        if (j.contains("until_mode")) until_mode = j["until_mode"].get<std::string>();
        if (j.contains("balance")) balance = j["balance"].get<double>();
        if (j.contains("sampler")) {
            const json& s = j["sampler"];
            if (s.contains("max_depth")) max_depth = s["max_depth"].get<int>();
            if (s.contains("max_bound")) max_bound = s["max_bound"].get<Year>();
        }
    }

    std::string hash() const { return llmclient::sha256_hex(to_json().dump()); }

    intervals::UntilMode parsed_until_mode() const {
        if (until_mode == "paper") return intervals::UntilMode::paper;
        if (until_mode == "exact") return intervals::UntilMode::exact;
        throw Error("until-mode must be 'paper' or 'exact'");
    }
};

struct GlobalOpts {
    RunConfig config;
    std::string config_path;
    std::string universe_text;
    bool allow_network = false;

    void finalize() {
        if (!config_path.empty()) config.apply_file(config_path);
        if (!universe_text.empty()) {
            auto colon = universe_text.find(':');
            if (colon == std::string::npos)
                throw Error("--universe expects LO:HI, got '" + universe_text + "'");
            config.universe = {std::stoll(universe_text.substr(0, colon)),
                               std::stoll(universe_text.substr(colon + 1))};
        }
        if (config.universe.lo > config.universe.hi) throw Error("universe is empty");
    }
};

std::string write_run_config(const fs::path& out_dir, const RunConfig& config) {
    fs::create_directories(out_dir);
    json j = config.to_json();
    std::string hash = config.hash();
    j["config_hash"] = hash;
    std::ofstream out(out_dir / "run_config.json");
    out << j.dump(2) << "\n";
    return hash;
}

void add_global_flags(CLI::App* cmd, GlobalOpts& opts) {
    cmd->add_option("--seed", opts.config.seed, "RNG seed");
    cmd->add_option("--config", opts.config_path, "JSON config file; flags override its values");
    cmd->add_option("--universe", opts.universe_text, "Universe years as LO:HI");
    cmd->add_option("--until-mode", opts.config.until_mode, "Until compilation mode: paper|exact");
    cmd->add_flag("--allow-network", opts.allow_network, "Permit outbound HTTP");
}

knowledge::FactStore load_store_dir(const fs::path& dir) {
    return knowledge::load_store(dir / "facts.jsonl", dir / "entities.jsonl",
                                 dir / "relations.jsonl");
}

casegen::TemplateSet load_templates(const std::string& path) {
    if (path.empty()) return casegen::TemplateSet::defaults();
    return casegen::TemplateSet::load(path);
}

template <typename Fn>
void write_jsonl(const fs::path& path, const std::string& config_hash, Fn&& emit) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    if (!config_hash.empty()) out << json{{"config_hash", config_hash}}.dump() << "\n";
    emit(out);
}

// ---------------------------------------------------------------------------
// ingest

struct IngestOpts {
    GlobalOpts global;
    std::string facts, entities, relations, out_dir;
    std::size_t sample_size = 0;
    std::string sparql_query_file, sparql_out;
};

int cmd_ingest(const IngestOpts& opts) {
    knowledge::FactStore store = knowledge::load_store(opts.facts, opts.entities, opts.relations);

    if (opts.sample_size > 0 && opts.sample_size < store.entities().size()) {
        std::vector<std::string> names;
        for (const auto& [name, e] : store.entities()) names.push_back(name);
        std::vector<std::string> sampled;
        std::mt19937_64 rng(opts.global.config.seed);
        std::sample(names.begin(), names.end(), std::back_inserter(sampled), opts.sample_size, rng);
        std::set<std::string> keep(sampled.begin(), sampled.end());
        knowledge::FactStoreBuilder b;
        for (const auto& [nm, meta] : store.relations()) b.add_relation(meta);
        for (const auto& name : keep) b.add_entity(*store.entity(name));
        for (const knowledge::Fact& f : store.facts())
            if (keep.count(f.subject)) b.add_fact(f);
        store = b.freeze();
    }

    fs::path out_dir(opts.out_dir);
    write_run_config(out_dir, opts.global.config);
    knowledge::save_store(store, out_dir / "facts.jsonl", out_dir / "entities.jsonl",
                          out_dir / "relations.jsonl");
    std::cout << "ingested " << store.facts().size() << " facts, " << store.entities().size()
              << " entities, " << store.relations().size() << " relations -> " << opts.out_dir
              << "\n";

    if (!opts.sparql_query_file.empty()) {
        if (!opts.global.allow_network)
            throw Error("SPARQL fetch requires --allow-network");
        const char* endpoint = std::getenv("FCHPROBE_SPARQL_ENDPOINT");
        if (!endpoint || !*endpoint)
            throw Error("FCHPROBE_SPARQL_ENDPOINT is not set");
        std::ifstream qin(opts.sparql_query_file);
        if (!qin) throw Error("cannot open " + opts.sparql_query_file);
        std::string query((std::istreambuf_iterator<char>(qin)), std::istreambuf_iterator<char>());
        std::vector<knowledge::Fact> fetched = knowledge::fetch_sparql(endpoint, query);
        fs::path sparql_out =
            opts.sparql_out.empty() ? out_dir / "sparql_facts.jsonl" : fs::path(opts.sparql_out);
        write_jsonl(sparql_out, "", [&](std::ostream& out) {
            for (const knowledge::Fact& f : fetched)
                out << json{{"nm", f.nm}, {"subject", f.subject}, {"object", f.object}}.dump()
                    << "\n";
        });
        std::cout << "fetched " << fetched.size() << " facts -> " << sparql_out.string()
                  << " (not merged)\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// derive

struct DeriveOpts {
    GlobalOpts global;
    std::string store_dir, category = "all", out = "derived.jsonl", composite_order = "sym-first";
    std::size_t neg_max_pairs = 1000;
};

int cmd_derive(const DeriveOpts& opts) {
    knowledge::FactStore store = load_store_dir(opts.store_dir);
    derivation::DeriveOptions dopts;
    dopts.neg_policy.max_pairs = opts.neg_max_pairs;
    dopts.neg_policy.seed = opts.global.config.seed;
    dopts.sym_before_trans = opts.composite_order != "trans-first";

    std::vector<knowledge::RelationCategory> categories;
    if (opts.category == "all")
        categories = {knowledge::RelationCategory::noun_phrase,
                      knowledge::RelationCategory::verb_passive,
                      knowledge::RelationCategory::verb_active};
    else if (auto cat = knowledge::parse_relation_category(opts.category))
        categories = {*cat};
    else
        throw Error("unknown relation category '" + opts.category + "'");

    std::vector<derivation::DerivedFact> derived;
    for (knowledge::RelationCategory cat : categories)
        for (derivation::DerivedFact& d : derivation::derive_all(store, cat, dopts))
            derived.push_back(std::move(d));
    std::sort(derived.begin(), derived.end());

    fs::path out_path(opts.out);
    std::string hash = write_run_config(out_path.has_parent_path() ? out_path.parent_path()
                                                                   : fs::path("."),
                                        opts.global.config);
    write_jsonl(out_path, hash, [&](std::ostream& out) {
        for (const derivation::DerivedFact& d : derived)
            out << derivation::to_json(d).dump() << "\n";
    });
    std::cout << "derived " << derived.size() << " facts -> " << opts.out << "\n";
    return 0;
}

std::vector<derivation::DerivedFact> read_derived(const fs::path& path) {
    std::vector<derivation::DerivedFact> out;
    knowledge::detail::for_each_jsonl(path, [&](const json& j) {
        if (!j.contains("nm")) return;  // config-hash record
        out.push_back(derivation::derived_fact_from_json(j));
    });
    return out;
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
    GlobalOpts global;
    std::string store_dir, derived, templates_path, out = "cases.jsonl";
    bool relational = false, temporal = false;
    bool mutate = true;
    std::size_t n = 100;
    std::string paraphrase_endpoint;
};

int cmd_gen(const GenOpts& opts) {
    knowledge::FactStore store = load_store_dir(opts.store_dir);
    casegen::TemplateSet templates = load_templates(opts.templates_path);
    const RunConfig& rc = opts.global.config;

    std::vector<casegen::QaCase> cases;
    if (opts.relational) {
        if (opts.derived.empty()) throw Error("--relational requires --derived");
        std::vector<derivation::DerivedFact> derived = read_derived(opts.derived);
        cases = casegen::gen_relational_cases(store, derived, templates, opts.mutate, rc.seed);
    }
    if (opts.temporal) {
        std::vector<std::string> warnings;
        std::vector<knowledge::TimestampedEvent> events =
            knowledge::timestamp_events(store, &warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
        mtl::History h;
        h.universe = rc.universe;
        for (const knowledge::TimestampedEvent& e : events) h.add_event(e.name, e.start, e.end);
        casegen::TemporalGenConfig cfg;
        cfg.n = opts.n;
        cfg.seed = rc.seed;
        cfg.balance = rc.balance;
        cfg.sampler.max_depth = rc.max_depth;
        cfg.sampler.max_bound = rc.max_bound;
        for (casegen::QaCase& c : casegen::gen_temporal_cases(h, cfg, templates, &store))
            cases.push_back(std::move(c));
    }
    if (!opts.relational && !opts.temporal)
        throw Error("choose at least one of --relational / --temporal");

    if (!opts.paraphrase_endpoint.empty()) {
        if (!opts.global.allow_network) throw Error("--paraphrase requires --allow-network");
        llmclient::EndpointConfig ec;
        ec.base_url = opts.paraphrase_endpoint;
        llmclient::Client client(ec);
        for (casegen::QaCase& c : cases)
            c.question = client.chat(
                "Paraphrase the following question without changing its meaning. Reply with the "
                "question only.\n" +
                c.question);
    }

    fs::path out_path(opts.out);
    std::string hash = write_run_config(out_path.has_parent_path() ? out_path.parent_path()
                                                                   : fs::path("."),
                                        rc);
    casegen::write_cases(out_path, cases, hash);
    std::cout << "generated " << cases.size() << " cases -> " << opts.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ask

struct AskOpts {
    GlobalOpts global;
    std::string cases, out = "responses.jsonl";
    bool mock = false;
    std::string mock_dir;
    std::string endpoint, model = "default", api_key_env = "FCHPROBE_API_KEY";
    double temperature = 0.0;
    int parallel = 4;
    double rpm = 0.0;
    std::string cache_dir = "cache";
};

// Deterministic canned responses keyed by case id: a correct echo of the
// ground facts, a wrong-relation echo, off-topic noise, or a refusal.
std::string synthesize_mock_response(const casegen::QaCase& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char ch : c.id) h = (h ^ static_cast<unsigned char>(ch)) * 1099511628211ULL;
    int shape = static_cast<int>(h % 10);
    std::string answer = c.answer == casegen::Answer::yes ? "Yes" : "No";
    std::string flipped = c.answer == casegen::Answer::yes ? "No" : "Yes";
    std::string out;
    if (shape < 6) {
        out = answer + ". The knowledge used:\n";
        int i = 1;
        for (const knowledge::Fact& f : c.ground_facts)
            out += std::to_string(i++) + ". " + f.subject + " -- " + f.nm + " -- " + f.object + ".\n";
    } else if (shape < 8) {
        out = flipped + ". The knowledge used:\n";
        int i = 1;
        for (const knowledge::Fact& f : c.ground_facts)
            out += std::to_string(i++) + ". " + f.subject + " -- " + f.nm + "_confused -- " +
                   f.object + ".\n";
    } else if (shape < 9) {
        out = "Yes. The knowledge used:\n";
        for (int i = 1; i <= 3; ++i)
            out += std::to_string(i) + ". unrelated_topic_" + std::to_string(i) +
                   " -- relates_to -- another_topic_" + std::to_string(i) + ".\n";
    } else {
        out = "I don't know.";
    }
    return out;
}

int cmd_ask(const AskOpts& opts) {
    std::vector<casegen::QaCase> cases = casegen::read_cases(opts.cases);
    llmclient::EndpointConfig ec;
    ec.base_url = opts.endpoint;
    ec.model = opts.model;
    ec.api_key_env = opts.api_key_env;
    ec.temperature = opts.temperature;
    ec.max_parallel = opts.parallel;
    ec.requests_per_minute = opts.rpm;
    ec.cache_dir = opts.cache_dir;
    llmclient::Client client(ec);

    if (opts.mock) {
        std::map<std::string, const casegen::QaCase*> by_id;
        for (const casegen::QaCase& c : cases) by_id[c.id] = &c;
        client.set_backend(llmclient::MockBackend(
            opts.mock_dir, [by_id](const std::string&, const std::string& hint) {
                auto it = by_id.find(hint);
                if (it == by_id.end()) throw Error("mock has no case for key '" + hint + "'");
                return synthesize_mock_response(*it->second);
            }));
    } else if (opts.endpoint.empty()) {
        throw Error("either --mock or --endpoint is required");
    } else if (!opts.global.allow_network) {
        throw Error("querying a live endpoint requires --allow-network");
    }

    std::vector<std::string> prompts, hints;
    for (const casegen::QaCase& c : cases) {
        prompts.push_back(casegen::render_prompt(c));
        hints.push_back(c.id);
    }
    std::vector<llmclient::ChatResult> results = client.chat_batch(prompts, hints);

    fs::path out_path(opts.out);
    std::string hash = write_run_config(out_path.has_parent_path() ? out_path.parent_path()
                                                                   : fs::path("."),
                                        opts.global.config);
    std::size_t failures = 0;
    write_jsonl(out_path, hash, [&](std::ostream& out) {
        for (std::size_t i = 0; i < cases.size(); ++i) {
            json j{{"case_id", cases[i].id}, {"raw_text", results[i].ok ? results[i].text : ""}};
            if (!results[i].ok) {
                j["error"] = results[i].error;
                ++failures;
            }
            out << j.dump() << "\n";
        }
    });
    std::cout << "asked " << cases.size() << " cases (" << failures << " failures) -> " << opts.out
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    GlobalOpts global;
    std::string cases, responses, out = "verdicts.jsonl";
    std::string synonyms_path, extractor_cmd, embedding_endpoint;
};

int cmd_eval(const EvalOpts& opts) {
    std::vector<casegen::QaCase> cases = casegen::read_cases(opts.cases);
    std::map<std::string, const casegen::QaCase*> by_id;
    for (const casegen::QaCase& c : cases) by_id[c.id] = &c;

    evaluation::EquivProvider equiv = evaluation::EquivProvider::exact();
    if (!opts.synonyms_path.empty()) {
        std::vector<std::pair<std::string, std::string>> pairs;
        knowledge::detail::for_each_jsonl(opts.synonyms_path, [&](const json& j) {
            pairs.emplace_back(j.at("a").get<std::string>(), j.at("b").get<std::string>());
        });
        equiv = evaluation::EquivProvider::with_synonyms(pairs);
    }
    if (!opts.embedding_endpoint.empty()) {
        if (!opts.global.allow_network)
            throw Error("--embedding-endpoint requires --allow-network");
        std::string url = opts.embedding_endpoint;
        equiv = evaluation::EquivProvider::with_embedder(
            [url](const std::vector<std::string>& texts) {
                auto [base, path] = knowledge::detail::split_url(url);
                httplib::Client http(base);
                auto res = http.Post(path, json{{"texts", texts}}.dump(), "application/json");
                if (!res || res->status != 200) throw Error("embedding endpoint unreachable");
                return json::parse(res->body)
                    .at("vectors")
                    .get<std::vector<std::vector<double>>>();
            },
            0.8);
    }

    evaluation::ClassifyConfig cc;
    cc.theta_e = opts.global.config.theta_e;
    cc.theta_n = opts.global.config.theta_n;
    if (!opts.extractor_cmd.empty()) cc.extractor.command = opts.extractor_cmd;

    std::vector<std::pair<std::string, evaluation::Verdict>> verdicts;
    knowledge::detail::for_each_jsonl(opts.responses, [&](const json& j) {
        if (!j.contains("case_id")) return;  // config-hash record
        std::string case_id = j.at("case_id").get<std::string>();
        auto it = by_id.find(case_id);
        if (it == by_id.end()) throw Error("response references unknown case_id '" + case_id + "'");
        evaluation::LlmResponse resp =
            evaluation::parse_response(case_id, j.at("raw_text").get<std::string>());
        evaluation::SemGraph ground = evaluation::graph_from_facts(it->second->ground_facts);
        verdicts.emplace_back(case_id, evaluation::classify(resp, ground, cc, equiv));
    });

    fs::path out_path(opts.out);
    std::string hash = write_run_config(out_path.has_parent_path() ? out_path.parent_path()
                                                                   : fs::path("."),
                                        opts.global.config);
    write_jsonl(out_path, hash, [&](std::ostream& out) {
        for (const auto& [case_id, v] : verdicts)
            out << json{{"case_id", case_id},
                        {"category", evaluation::category_name(v.category)},
                        {"s_e", v.s_e},
                        {"s_n", v.s_n}}
                       .dump()
                << "\n";
    });
    std::cout << "evaluated " << verdicts.size() << " responses -> " << opts.out << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
    GlobalOpts global;
    std::string cases, verdicts, out_json = "report.json", out_csv = "report.csv";
};

int cmd_report(const ReportOpts& opts) {
    std::vector<casegen::QaCase> cases = casegen::read_cases(opts.cases);
    std::vector<std::pair<std::string, evaluation::Verdict>> verdicts;
    knowledge::detail::for_each_jsonl(opts.verdicts, [&](const json& j) {
        if (!j.contains("case_id")) return;
        evaluation::Verdict v;
        auto cat = evaluation::parse_verdict_category(j.at("category").get<std::string>());
        if (!cat) throw Error("unknown verdict category '" + j.at("category").get<std::string>() + "'");
        v.category = *cat;
        v.s_e = j.at("s_e").get<double>();
        v.s_n = j.at("s_n").get<double>();
        verdicts.emplace_back(j.at("case_id").get<std::string>(), v);
    });

    evaluation::Report rep = evaluation::report(cases, verdicts);
    std::string hash = opts.global.config.hash();
    {
        fs::path p(opts.out_json);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(p);
        out << rep.to_json(hash).dump(2) << "\n";
    }
    {
        fs::path p(opts.out_csv);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::ofstream out(p);
        out << rep.to_csv(hash);
    }
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4f", rep.overall.hallucination_rate());
    std::cout << "report over " << rep.overall.total() << " verdicts, hallucination rate " << rate
              << " -> " << opts.out_json << ", " << opts.out_csv << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// selftest

struct SelftestOpts {
    GlobalOpts global;
    int n = 1000;
    std::string gap_report = "gap_report.json";
    std::string inject_fault;
};

int cmd_selftest(const SelftestOpts& opts) {
    selftest::CompileFn compile = selftest::default_compile();
    if (opts.inject_fault == "finally-offset")
        compile = selftest::broken_finally_compile();
    else if (!opts.inject_fault.empty())
        throw Error("unknown fault '" + opts.inject_fault + "'");

    bool ok = true;
    std::vector<selftest::FixtureResult> fixtures = selftest::run_paper_fixtures(compile);
    for (const selftest::FixtureResult& f : fixtures) {
        std::cout << (f.pass ? "[PASS] " : "[FAIL] ") << "fixture: " << f.name;
        if (!f.pass) std::cout << " -- " << f.detail;
        std::cout << "\n";
        ok = ok && f.pass;
    }

    selftest::TrialConfig tc;
    tc.n = opts.n;
    tc.seed = opts.global.config.seed;
    if (opts.n > 0) {
        selftest::DifferentialResult diff = selftest::run_non_until_differential(tc, compile);
        bool diff_ok = diff.mismatches == 0;
        std::cout << (diff_ok ? "[PASS] " : "[FAIL] ") << "differential (non-Until): "
                  << diff.trials - diff.mismatches << "/" << diff.trials << " exact\n";
        if (!diff_ok) std::cout << "       first failure: " << diff.first_failure << "\n";
        ok = ok && diff_ok;

        selftest::UntilTrialStats until = selftest::run_until_soundness(tc, compile);
        bool sound = until.soundness_violations == 0;
        std::cout << (sound ? "[PASS] " : "[FAIL] ") << "until soundness: " << until.trials
                  << " trials, " << until.soundness_violations << " violations; completeness gap "
                  << until.total_gap_points << " points over " << until.trials_with_gap
                  << " trials\n";
        if (!sound) std::cout << "       first violation: " << until.first_violation << "\n";
        ok = ok && sound;

        fs::path gap_path(opts.gap_report);
        if (gap_path.has_parent_path()) fs::create_directories(gap_path.parent_path());
        std::ofstream out(gap_path);
        out << selftest::gap_report_json(tc, until).dump(2) << "\n";
        std::cout << "gap report -> " << opts.gap_report << "\n";
    }
    std::cout << (ok ? "selftest passed" : "selftest FAILED") << "\n";
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-based hallucination test-case generator and evaluator"};
    app.require_subcommand(1);

    IngestOpts ingest;
    CLI::App* c_ingest = app.add_subcommand("ingest", "Load and canonicalize a knowledge base");
    add_global_flags(c_ingest, ingest.global);
    c_ingest->add_option("--facts", ingest.facts, "facts.jsonl")->required();
    c_ingest->add_option("--entities", ingest.entities, "entities.jsonl")->required();
    c_ingest->add_option("--relations", ingest.relations, "relations.jsonl")->required();
    c_ingest->add_option("--out-dir", ingest.out_dir, "output store directory")->required();
    c_ingest->add_option("--sample-size", ingest.sample_size,
                         "keep a seeded sample of this many entities");
    c_ingest->add_option("--sparql-query", ingest.sparql_query_file,
                         "SPARQL query file to fetch (kept separate from the store)");
    c_ingest->add_option("--sparql-out", ingest.sparql_out, "where to write fetched facts");

    DeriveOpts derive;
    CLI::App* c_derive = app.add_subcommand("derive", "Derive new facts from the ground facts");
    add_global_flags(c_derive, derive.global);
    c_derive->add_option("--store-dir", derive.store_dir, "ingested store directory")->required();
    c_derive->add_option("--category", derive.category, "noun|verb_passive|verb_active|all");
    c_derive->add_option("--out", derive.out, "derived facts output");
    c_derive->add_option("--neg-max-pairs", derive.neg_max_pairs,
                         "cap on sampled negation candidate pairs");
    c_derive->add_option("--composite-order", derive.composite_order, "sym-first|trans-first");

    GenOpts gen;
    CLI::App* c_gen = app.add_subcommand("gen", "Generate Q&A test cases");
    add_global_flags(c_gen, gen.global);
    c_gen->add_option("--store-dir", gen.store_dir, "ingested store directory")->required();
    c_gen->add_flag("--relational", gen.relational, "generate relational cases");
    c_gen->add_flag("--temporal", gen.temporal, "generate temporal cases");
    c_gen->add_option("--derived", gen.derived, "derived.jsonl (for --relational)");
    c_gen->add_option("--n", gen.n, "number of temporal cases");
    c_gen->add_option("--balance", gen.global.config.balance, "Yes-answer ratio for temporal cases");
    c_gen->add_option("--max-depth", gen.global.config.max_depth, "formula sampler depth");
    c_gen->add_option("--max-bound", gen.global.config.max_bound, "formula sampler bound cap");
    c_gen->add_flag("--mutate,!--no-mutate", gen.mutate, "emit antonym-mutated twins");
    c_gen->add_option("--templates", gen.templates_path, "template JSON file");
    c_gen->add_option("--out", gen.out, "cases output");
    c_gen->add_option("--paraphrase", gen.paraphrase_endpoint,
                      "LLM endpoint for question paraphrasing");

    AskOpts ask;
    CLI::App* c_ask = app.add_subcommand("ask", "Send prompts to an LLM endpoint or the mock");
    add_global_flags(c_ask, ask.global);
    c_ask->add_option("--cases", ask.cases, "cases.jsonl")->required();
    c_ask->add_option("--out", ask.out, "responses output");
    c_ask->add_flag("--mock", ask.mock, "use the deterministic mock backend");
    c_ask->add_option("--mock-dir", ask.mock_dir, "directory of <case_id>.txt fixtures");
    c_ask->add_option("--endpoint", ask.endpoint, "chat-completions base URL");
    c_ask->add_option("--model", ask.model, "model id");
    c_ask->add_option("--api-key-env", ask.api_key_env, "env var holding the API key");
    c_ask->add_option("--temperature", ask.temperature, "sampling temperature");
    c_ask->add_option("--parallel", ask.parallel, "max in-flight requests");
    c_ask->add_option("--rpm", ask.rpm, "requests per minute (0 = unlimited)");
    c_ask->add_option("--cache-dir", ask.cache_dir, "response cache directory");

    EvalOpts eval;
    CLI::App* c_eval = app.add_subcommand("eval", "Classify responses against the ground truth");
    add_global_flags(c_eval, eval.global);
    c_eval->add_option("--cases", eval.cases, "cases.jsonl")->required();
    c_eval->add_option("--responses", eval.responses, "responses.jsonl")->required();
    c_eval->add_option("--out", eval.out, "verdicts output");
    c_eval->add_option("--theta-e", eval.global.config.theta_e, "edge similarity threshold");
    c_eval->add_option("--theta-n", eval.global.config.theta_n, "node similarity threshold");
    c_eval->add_option("--synonyms", eval.synonyms_path, "synonym pair JSONL");
    c_eval->add_option("--extractor-cmd", eval.extractor_cmd,
                       "external triple extractor command (stdin text, stdout triple JSONL)");
    c_eval->add_option("--embedding-endpoint", eval.embedding_endpoint,
                       "embedding service for term equivalence");

    ReportOpts report;
    CLI::App* c_report = app.add_subcommand("report", "Aggregate verdicts into report files");
    add_global_flags(c_report, report.global);
    c_report->add_option("--cases", report.cases, "cases.jsonl")->required();
    c_report->add_option("--verdicts", report.verdicts, "verdicts.jsonl")->required();
    c_report->add_option("--out-json", report.out_json, "JSON report path");
    c_report->add_option("--out-csv", report.out_csv, "CSV report path");

    SelftestOpts selftest_opts;
    CLI::App* c_selftest = app.add_subcommand("selftest", "Run the self-verification suites");
    add_global_flags(c_selftest, selftest_opts.global);
    c_selftest->add_option("--n", selftest_opts.n, "number of randomized trials");
    c_selftest->add_option("--gap-report", selftest_opts.gap_report, "gap report path");
    c_selftest->add_option("--inject-fault", selftest_opts.inject_fault,
                           "fault injection for harness checks (finally-offset)")
        ->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c_ingest->parsed()) {
            ingest.global.finalize();
            return cmd_ingest(ingest);
        }
        if (c_derive->parsed()) {
            derive.global.finalize();
            return cmd_derive(derive);
        }
        if (c_gen->parsed()) {
            gen.global.finalize();
            return cmd_gen(gen);
        }
        if (c_ask->parsed()) {
            ask.global.finalize();
            return cmd_ask(ask);
        }
        if (c_eval->parsed()) {
            eval.global.finalize();
            return cmd_eval(eval);
        }
        if (c_report->parsed()) {
            report.global.finalize();
            return cmd_report(report);
        }
        if (c_selftest->parsed()) {
            selftest_opts.global.finalize();
            return cmd_selftest(selftest_opts);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
