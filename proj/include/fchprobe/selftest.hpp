#pragma once

// Self-verification suites: the worked interval fixtures, randomized
// differential trials of the compiler against the point-semantics sweep, and
// Until soundness trials with a completeness-gap report.

#include <random>

#include "fchprobe/mtl_compile.hpp"

namespace fchprobe::selftest {

using intervals::CompileMode;
using intervals::IntervalSet;
using intervals::Span;
using intervals::UntilMode;
using mtl::Formula;
using mtl::FormulaPtr;
using mtl::History;

using CompileFn = std::function<IntervalSet(const History&, const Formula&, CompileMode)>;

inline CompileFn default_compile() {
    return [](const History& h, const Formula& f, CompileMode m) {
        return intervals::compile_mtl(h, f, m);
    };
}

// Fault injection for harness checks: widens every Finally upper bound by one
// before compilation, which any healthy differential run must catch.
inline FormulaPtr skew_finally_bounds(const Formula& f) {
    using mtl::Op;
    auto l = f.lhs() ? skew_finally_bounds(*f.lhs()) : nullptr;
    auto r = f.rhs() ? skew_finally_bounds(*f.rhs()) : nullptr;
    switch (f.op()) {
        case Op::ap: return Formula::ap(f.name());
        case Op::finally_:
            return Formula::finally_({f.bound().lo, f.bound().hi + 1}, std::move(l));
        case Op::globally: return Formula::globally(f.bound(), std::move(l));
        case Op::until: return Formula::until(f.bound(), std::move(l), std::move(r));
        case Op::next: return Formula::next(std::move(l));
        case Op::not_: return Formula::negation(std::move(l));
        case Op::and_: return Formula::conj(std::move(l), std::move(r));
        default: return Formula::disj(std::move(l), std::move(r));
    }
}

inline CompileFn broken_finally_compile() {
    return [](const History& h, const Formula& f, CompileMode m) {
        return intervals::compile_mtl(h, *skew_finally_bounds(f), m);
    };
}

// ---------------------------------------------------------------------------
// Worked fixtures

struct FixtureResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline History dickens_history() {
    History h;
    h.add_event("charles_dickens", 1812, 1870);
    h.add_event("victorian_era", 1837, 1901);
    h.universe = {1, 2024};
    return h;
}

inline std::vector<FixtureResult> run_paper_fixtures(const CompileFn& compile = default_compile()) {
    std::vector<FixtureResult> out;
    History hs = dickens_history();

    auto check_set = [&](const std::string& name, const History& h, const std::string& formula,
                         UntilMode mode, const IntervalSet& expected) {
        FixtureResult r{name, false, ""};
        try {
            IntervalSet got = compile(h, *mtl::parse_mtl(formula), CompileMode{mode});
            r.pass = got == expected;
            if (!r.pass)
                r.detail = formula + " -> " + got.to_string() + ", expected " + expected.to_string();
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        out.push_back(std::move(r));
    };
    auto check_eval = [&](const std::string& name, const std::string& formula, Year t,
                          bool expected) {
        FixtureResult r{name, false, ""};
        try {
            bool got = mtl::eval_point(hs, *mtl::parse_mtl(formula), t);
            r.pass = got == expected;
            if (!r.pass)
                r.detail = formula + " at " + std::to_string(t) + " -> " +
                           (got ? "true" : "false");
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        out.push_back(std::move(r));
    };

    check_eval("ap charles_dickens @1800 is false", "charles_dickens", 1800, false);
    check_eval("ap victorian_era @1900 is true", "victorian_era", 1900, true);
    check_set("finally F[0,40]", hs, "F[0,40](victorian_era)", UntilMode::paper,
              IntervalSet::single(1797, 1901));
    check_set("globally G[30,50]", hs, "G[30,50](victorian_era)", UntilMode::paper,
              IntervalSet::single(1807, 1851));
    check_set("next N", hs, "N(victorian_era)", UntilMode::paper, IntervalSet::single(1836, 1900));
    check_set("until U[10,20] helper chain", hs, "U[10,20](charles_dickens, victorian_era)",
              UntilMode::paper, IntervalSet::single(1817, 1861));
    check_set("negation complement", hs, "!victorian_era", UntilMode::paper,
              intervals::union_of(IntervalSet::single(1, 1836), IntervalSet::single(1902, 2024)));
    check_set("conjunction", hs, "charles_dickens & victorian_era", UntilMode::paper,
              IntervalSet::single(1837, 1870));
    check_set("disjunction", hs, "charles_dickens | victorian_era", UntilMode::paper,
              IntervalSet::single(1812, 1901));

    History ben;
    ben.add_event("ben_10", 2005, 2008);
    ben.universe = {1, 2024};
    check_set("finally F[1,3] over ben_10", ben, "F[1,3](ben_10)", UntilMode::paper,
              IntervalSet::single(2002, 2007));
    {
        FixtureResult r{"ben_10 query at 2000 answers No", false, ""};
        try {
            IntervalSet set = compile(ben, *mtl::parse_mtl("F[1,3](ben_10)"), CompileMode{});
            r.pass = !set.contains(2000);
            if (!r.pass) r.detail = "2000 unexpectedly inside " + set.to_string();
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Randomized trials

struct TrialConfig {
    int n = 1000;
    std::uint64_t seed = 0;
    int max_events = 8;
    Span universe{1, 300};
    int max_depth = 3;
    Year max_bound = 40;
};

inline History random_history(std::mt19937_64& rng, const TrialConfig& cfg) {
    History h;
    h.universe = cfg.universe;
    std::uniform_int_distribution<int> count(1, cfg.max_events);
    std::uniform_int_distribution<int> spans_per_event(1, 3);
    std::uniform_int_distribution<Year> point(cfg.universe.lo, cfg.universe.hi);
    int events = count(rng);
    for (int i = 0; i < events; ++i) {
        std::string name = "ev" + std::to_string(i);
        int spans = spans_per_event(rng);
        for (int s = 0; s < spans; ++s) {
            Year a = point(rng);
            Year b = point(rng);
            if (a > b) std::swap(a, b);
            h.add_event(name, a, b);
        }
    }
    return h;
}

inline std::vector<std::string> event_names(const History& h) {
    std::vector<std::string> out;
    for (const auto& [name, spans] : h.events) out.push_back(name);
    return out;
}

struct DifferentialResult {
    int trials = 0;
    int mismatches = 0;
    std::string first_failure;
};

// Non-Until formulas must compile to exactly the point-semantics sweep.
inline DifferentialResult run_non_until_differential(const TrialConfig& cfg,
                                                     const CompileFn& compile = default_compile()) {
    DifferentialResult result;
    std::mt19937_64 rng(cfg.seed);
    mtl::SamplerConfig sampler;
    sampler.max_depth = cfg.max_depth;
    sampler.max_bound = cfg.max_bound;
    sampler.weights.until = 0.0;
    for (int i = 0; i < cfg.n; ++i) {
        History h = random_history(rng, cfg);
        FormulaPtr f = mtl::sample_formula(rng(), event_names(h), sampler);
        IntervalSet oracle = mtl::validity_set(h, *f);
        for (UntilMode mode : {UntilMode::paper, UntilMode::exact}) {
            IntervalSet got = compile(h, *f, CompileMode{mode});
            ++result.trials;
            if (got == oracle) continue;
            ++result.mismatches;
            if (result.first_failure.empty())
                result.first_failure = mtl::format(*f) + " -> " + got.to_string() +
                                       ", point semantics give " + oracle.to_string();
        }
    }
    return result;
}

struct GapRecord {
    std::string formula;
    nlohmann::json history;
    IntervalSet paper_set;
    IntervalSet exact_set;
    Year missing_points = 0;
    std::vector<Year> witnesses;
};

struct UntilTrialStats {
    int trials = 0;
    int soundness_violations = 0;
    int trials_with_gap = 0;
    Year total_gap_points = 0;
    std::vector<GapRecord> gaps;
    std::string first_violation;
};

inline nlohmann::json history_json(const History& h) {
    nlohmann::json events = nlohmann::json::object();
    for (const auto& [name, spans] : h.events) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Span& sp : spans) arr.push_back({sp.lo, sp.hi});
        events[name] = arr;
    }
    return {{"universe", {h.universe.lo, h.universe.hi}}, {"events", events}};
}

// Random Until instances with Until-free operands: the helper-chain result
// must be a subset of the point-semantics set, and the uncovered remainder is
// recorded as the completeness gap.
inline UntilTrialStats run_until_soundness(const TrialConfig& cfg,
                                           const CompileFn& compile = default_compile(),
                                           std::size_t max_gap_records = 1000) {
    UntilTrialStats stats;
    std::mt19937_64 rng(cfg.seed);
    mtl::SamplerConfig operand_sampler;
    operand_sampler.max_depth = std::max(1, cfg.max_depth - 1);
    operand_sampler.max_bound = cfg.max_bound;
    operand_sampler.weights.until = 0.0;
    std::uniform_int_distribution<Year> bound(0, cfg.max_bound);
    for (int i = 0; i < cfg.n; ++i) {
        History h = random_history(rng, cfg);
        std::vector<std::string> events = event_names(h);
        FormulaPtr lhs = mtl::sample_formula(rng(), events, operand_sampler);
        FormulaPtr rhs = mtl::sample_formula(rng(), events, operand_sampler);
        Year lo = bound(rng);
        Year hi = bound(rng);
        if (lo > hi) std::swap(lo, hi);
        FormulaPtr f = Formula::until({lo, hi}, std::move(lhs), std::move(rhs));

        IntervalSet paper = compile(h, *f, CompileMode{UntilMode::paper});
        IntervalSet oracle = mtl::validity_set(h, *f);
        ++stats.trials;

        IntervalSet unsound = intervals::difference(paper, oracle);
        if (!unsound.empty()) {
            ++stats.soundness_violations;
            if (stats.first_violation.empty())
                stats.first_violation = mtl::format(*f) + " claims " + unsound.to_string() +
                                        " beyond the point semantics";
            continue;
        }
        IntervalSet missing = intervals::difference(oracle, paper);
        if (missing.empty()) continue;
        ++stats.trials_with_gap;
        stats.total_gap_points += missing.count();
        if (stats.gaps.size() < max_gap_records) {
            GapRecord rec;
            rec.formula = mtl::format(*f);
            rec.history = history_json(h);
            rec.paper_set = paper;
            rec.exact_set = oracle;
            rec.missing_points = missing.count();
            for (Year k = 0; k < missing.count() && rec.witnesses.size() < 8; ++k)
                rec.witnesses.push_back(missing.nth_point(k));
            stats.gaps.push_back(std::move(rec));
        }
    }
    return stats;
}

inline nlohmann::json gap_report_json(const TrialConfig& cfg, const UntilTrialStats& stats) {
    nlohmann::json records = nlohmann::json::array();
    for (const GapRecord& g : stats.gaps) {
        records.push_back({{"formula", g.formula},
                           {"history", g.history},
                           {"paper_set", g.paper_set.to_json()},
                           {"exact_set", g.exact_set.to_json()},
                           {"missing_points", g.missing_points},
                           {"witnesses", g.witnesses}});
    }
    return {{"trials", stats.trials},
            {"seed", cfg.seed},
            {"soundness_violations", stats.soundness_violations},
            {"trials_with_gap", stats.trials_with_gap},
            {"total_gap_points", stats.total_gap_points},
            {"records", records}};
}

}  // namespace fchprobe::selftest
