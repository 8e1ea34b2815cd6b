#pragma once

// Bottom-up compilation of MTL formulas into interval sets.
//
// Each subformula is compiled into the set of time points at which it holds,
// evaluated on a working range [universe.lo, horizon] where the horizon grows
// downward into the tree by each operator's upper bound. Compiling on the
// extended range keeps negation correct near the upper edge of the universe:
// complements are taken on the working range, and only the final result is
// clipped back to the universe.
//
// Until supports two modes. The "paper" helper chain computes, per maximal
// lhs-span [n1,n2]:
//     helper1 = [n1+lo, n2+1]
//     helper2 = helper1 ∩ ⟦rhs⟧
//     shifted = [m1-hi, m2-lo] per helper2 span [m1,m2]
//     contribution = shifted ∩ [n1,n2]
// The final intersection stays within the originating span: intersecting with
// the whole lhs set instead would admit points whose witness lies across a gap
// where lhs fails, breaking soundness for multi-span lhs sets. The chain
// under-approximates the point semantics at span edges; the "exact" mode
// enumerates the Until definition directly and matches validity_set.

#include <optional>

#include "fchprobe/intervals.hpp"
#include "fchprobe/mtl.hpp"

namespace fchprobe::intervals {

enum class UntilMode { paper, exact };

struct CompileMode {
    UntilMode until_mode = UntilMode::paper;
};

namespace detail {

using mtl::Formula;
using mtl::History;
using mtl::Op;
using mtl::TimeBound;

inline IntervalSet compile_rec(const History& h, const Formula& f, Year horizon, UntilMode mode);

inline IntervalSet compile_until_chain(const History& h, const Formula& f, Year horizon,
                                       UntilMode mode, TimeBound b) {
    const Span range{h.universe.lo, horizon};
    IntervalSet lhs = compile_rec(h, *f.lhs(), horizon + b.hi, mode);
    IntervalSet rhs = compile_rec(h, *f.rhs(), horizon + b.hi, mode);
    IntervalSet result;
    for (const Span& sp : lhs.spans()) {
        if (sp.lo + b.lo > sp.hi + 1) continue;  // helper1 empty for short spans
        IntervalSet helper1 = IntervalSet::single(sp.lo + b.lo, sp.hi + 1);
        IntervalSet helper2 = intersect(helper1, rhs);
        std::vector<Span> shifted;
        for (const Span& m : helper2.spans()) shifted.push_back({m.lo - b.hi, m.hi - b.lo});
        IntervalSet contribution =
            intersect(IntervalSet::from_spans(std::move(shifted)), IntervalSet::single(sp.lo, sp.hi));
        result = union_of(result, contribution);
    }
    return result.clip(range);
}

inline IntervalSet compile_until(const History& h, const Formula& f, Year horizon, UntilMode mode) {
    const TimeBound& b = f.bound();
    const Span range{h.universe.lo, horizon};

    if (mode == UntilMode::exact) {
        IntervalSet lhs = compile_rec(h, *f.lhs(), horizon + b.hi, mode);
        IntervalSet rhs = compile_rec(h, *f.rhs(), horizon + b.hi, mode);
        std::vector<Span> raw;
        for (Year t = range.lo; t <= range.hi; ++t) {
            bool holds = false;
            for (Year d = b.lo; d <= b.hi && !holds; ++d) {
                if (!rhs.contains(t + d)) continue;
                bool between = true;
                for (Year k = t + 1; k < t + d && between; ++k) between = lhs.contains(k);
                holds = between;
            }
            if (!holds) continue;
            if (!raw.empty() && raw.back().hi == t - 1)
                raw.back().hi = t;
            else
                raw.push_back({t, t});
        }
        return IntervalSet::from_spans(std::move(raw));
    }

    // Bounds containing 0 decompose through U[0,0] ≡ rhs.
    if (b.lo == 0) {
        IntervalSet base = compile_rec(h, *f.rhs(), horizon, mode).clip(range);
        if (b.hi == 0) return base;
        return union_of(base, compile_until_chain(h, f, horizon, mode, {1, b.hi}));
    }
    return compile_until_chain(h, f, horizon, mode, b);
}

inline IntervalSet compile_rec(const History& h, const Formula& f, Year horizon, UntilMode mode) {
    const Span range{h.universe.lo, horizon};
    switch (f.op()) {
        case Op::ap: {
            auto it = h.events.find(f.name());
            if (it == h.events.end()) throw Error("unknown event '" + f.name() + "'");
            return IntervalSet::from_spans(it->second).clip(range);
        }
        case Op::finally_: {
            const TimeBound& b = f.bound();
            IntervalSet child = compile_rec(h, *f.lhs(), horizon + b.hi, mode);
            std::vector<Span> out;
            for (const Span& sp : child.spans()) out.push_back({sp.lo - b.hi, sp.hi - b.lo});
            return IntervalSet::from_spans(std::move(out)).clip(range);
        }
        case Op::globally: {
            const TimeBound& b = f.bound();
            IntervalSet child = compile_rec(h, *f.lhs(), horizon + b.hi, mode);
            std::vector<Span> out;
            for (const Span& sp : child.spans()) {
                Year lo = sp.lo - b.lo;
                Year hi = sp.hi - b.hi;
                if (lo <= hi) out.push_back({lo, hi});
            }
            return IntervalSet::from_spans(std::move(out)).clip(range);
        }
        case Op::next: {
            IntervalSet child = compile_rec(h, *f.lhs(), horizon + 1, mode);
            return child.shift(-1).clip(range);
        }
        case Op::until: return compile_until(h, f, horizon, mode);
        case Op::not_: return complement(compile_rec(h, *f.lhs(), horizon, mode), range);
        case Op::and_:
            return intersect(compile_rec(h, *f.lhs(), horizon, mode),
                             compile_rec(h, *f.rhs(), horizon, mode));
        case Op::or_:
            return union_of(compile_rec(h, *f.lhs(), horizon, mode),
                            compile_rec(h, *f.rhs(), horizon, mode));
    }
    throw Error("unreachable");
}

}  // namespace detail

inline IntervalSet compile_mtl(const mtl::History& h, const mtl::Formula& f,
                               CompileMode mode = {}) {
    if (h.universe.lo > h.universe.hi) throw Error("empty universe");
    return detail::compile_rec(h, f, h.universe.hi, mode.until_mode).clip(h.universe);
}

// Paper-vs-exact comparison for one formula. `missing` holds points the
// helper chain fails to cover (completeness gap); `unsound` holds points the
// chain claims but the point semantics rejects, which indicates a bug.
struct ModeDivergence {
    std::string formula;
    IntervalSet paper_set;
    IntervalSet exact_set;
    std::vector<Year> missing;
    std::vector<Year> unsound;
};

inline std::optional<ModeDivergence> mode_divergence(const mtl::History& h, const mtl::Formula& f,
                                                     std::size_t max_witnesses = 8) {
    IntervalSet paper = compile_mtl(h, f, {UntilMode::paper});
    IntervalSet exact = compile_mtl(h, f, {UntilMode::exact});
    if (paper == exact) return std::nullopt;
    ModeDivergence d;
    d.formula = mtl::format(f);
    d.paper_set = paper;
    d.exact_set = exact;
    IntervalSet missing = difference(exact, paper);
    IntervalSet unsound = difference(paper, exact);
    for (Year k = 0; k < missing.count() && d.missing.size() < max_witnesses; ++k)
        d.missing.push_back(missing.nth_point(k));
    for (Year k = 0; k < unsound.count() && d.unsound.size() < max_witnesses; ++k)
        d.unsound.push_back(unsound.nth_point(k));
    return d;
}

}  // namespace fchprobe::intervals
