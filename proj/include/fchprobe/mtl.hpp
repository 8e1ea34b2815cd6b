#pragma once

// Metric-temporal-logic formulas over named historical events, with a
// point-based satisfaction relation used as the exact reference semantics.
//
// Concrete syntax:
//   formula := ap | "F" bound "(" formula ")" | "G" bound "(" formula ")"
//            | "N" "(" formula ")" | "U" bound "(" formula "," formula ")"
//            | "!" formula | formula "&" formula | formula "|" formula
//            | "(" formula ")"
//   bound   := "[" nat "," nat "]"
//   ap      := [a-z][a-z0-9_]*
// "&" binds tighter than "|", "!" tightest, binary operators left-associative.

#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fchprobe/intervals.hpp"

namespace fchprobe::mtl {

using intervals::IntervalSet;
using intervals::Span;

struct TimeBound {
    Year lo = 0;
    Year hi = 0;
    bool operator==(const TimeBound&) const = default;
};

enum class Op { ap, finally_, globally, until, next, not_, and_, or_ };

class Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

class Formula {
public:
    static FormulaPtr ap(std::string name) {
        return make(Op::ap, std::move(name), {}, nullptr, nullptr);
    }
    static FormulaPtr finally_(TimeBound b, FormulaPtr f) {
        check_bound(b);
        return make(Op::finally_, {}, b, std::move(f), nullptr);
    }
    static FormulaPtr globally(TimeBound b, FormulaPtr f) {
        check_bound(b);
        return make(Op::globally, {}, b, std::move(f), nullptr);
    }
    static FormulaPtr until(TimeBound b, FormulaPtr lhs, FormulaPtr rhs) {
        check_bound(b);
        return make(Op::until, {}, b, std::move(lhs), std::move(rhs));
    }
    static FormulaPtr next(FormulaPtr f) { return make(Op::next, {}, {}, std::move(f), nullptr); }
    static FormulaPtr negation(FormulaPtr f) { return make(Op::not_, {}, {}, std::move(f), nullptr); }
    static FormulaPtr conj(FormulaPtr lhs, FormulaPtr rhs) {
        return make(Op::and_, {}, {}, std::move(lhs), std::move(rhs));
    }
    static FormulaPtr disj(FormulaPtr lhs, FormulaPtr rhs) {
        return make(Op::or_, {}, {}, std::move(lhs), std::move(rhs));
    }

    Op op() const { return op_; }
    const std::string& name() const { return name_; }
    const TimeBound& bound() const { return bound_; }
    const FormulaPtr& lhs() const { return lhs_; }
    const FormulaPtr& rhs() const { return rhs_; }

    int depth() const {
        int d = 0;
        if (lhs_) d = lhs_->depth();
        if (rhs_) d = std::max(d, rhs_->depth());
        return d + 1;
    }

    void collect_events(std::set<std::string>& out) const {
        if (op_ == Op::ap) out.insert(name_);
        if (lhs_) lhs_->collect_events(out);
        if (rhs_) rhs_->collect_events(out);
    }

    // Furthest offset past t that evaluation at t can inspect.
    Year lookahead() const {
        Year child = 0;
        if (lhs_) child = lhs_->lookahead();
        if (rhs_) child = std::max(child, rhs_->lookahead());
        switch (op_) {
            case Op::ap: return 0;
            case Op::next: return child + 1;
            case Op::finally_:
            case Op::globally:
            case Op::until: return child + bound_.hi;
            default: return child;
        }
    }

    bool equals(const Formula& o) const {
        if (op_ != o.op_ || name_ != o.name_ || !(bound_ == o.bound_)) return false;
        if (static_cast<bool>(lhs_) != static_cast<bool>(o.lhs_)) return false;
        if (static_cast<bool>(rhs_) != static_cast<bool>(o.rhs_)) return false;
        if (lhs_ && !lhs_->equals(*o.lhs_)) return false;
        if (rhs_ && !rhs_->equals(*o.rhs_)) return false;
        return true;
    }

private:
    static void check_bound(const TimeBound& b) {
        if (b.lo < 0 || b.hi < 0)
            throw Error("time bounds must be non-negative");
        if (b.lo > b.hi)
            throw Error("time bound [" + std::to_string(b.lo) + "," + std::to_string(b.hi) +
                        "] is reversed");
    }
    static FormulaPtr make(Op op, std::string name, TimeBound b, FormulaPtr l, FormulaPtr r) {
        auto f = std::make_shared<Formula>();
        f->op_ = op;
        f->name_ = std::move(name);
        f->bound_ = b;
        f->lhs_ = std::move(l);
        f->rhs_ = std::move(r);
        return f;
    }

    Op op_ = Op::ap;
    std::string name_;
    TimeBound bound_{};
    FormulaPtr lhs_, rhs_;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline int precedence(Op op) {
    switch (op) {
        case Op::or_: return 1;
        case Op::and_: return 2;
        default: return 3;  // unary and self-delimiting forms
    }
}

inline std::string bound_text(const TimeBound& b) {
    return "[" + std::to_string(b.lo) + "," + std::to_string(b.hi) + "]";
}

inline void format_rec(const Formula& f, std::string& out, int parent_prec, bool right_operand) {
    int prec = precedence(f.op());
    bool parens = prec < parent_prec || (prec == parent_prec && right_operand && prec < 3);
    if (parens) out += "(";
    switch (f.op()) {
        case Op::ap: out += f.name(); break;
        case Op::finally_:
            out += "F" + bound_text(f.bound()) + "(";
            format_rec(*f.lhs(), out, 0, false);
            out += ")";
            break;
        case Op::globally:
            out += "G" + bound_text(f.bound()) + "(";
            format_rec(*f.lhs(), out, 0, false);
            out += ")";
            break;
        case Op::until:
            out += "U" + bound_text(f.bound()) + "(";
            format_rec(*f.lhs(), out, 0, false);
            out += ", ";
            format_rec(*f.rhs(), out, 0, false);
            out += ")";
            break;
        case Op::next:
            out += "N(";
            format_rec(*f.lhs(), out, 0, false);
            out += ")";
            break;
        case Op::not_:
            out += "!";
            format_rec(*f.lhs(), out, 3, false);
            break;
        case Op::and_:
            format_rec(*f.lhs(), out, 2, false);
            out += " & ";
            format_rec(*f.rhs(), out, 2, true);
            break;
        case Op::or_:
            format_rec(*f.lhs(), out, 1, false);
            out += " | ";
            format_rec(*f.rhs(), out, 1, true);
            break;
    }
    if (parens) out += ")";
}

}  // namespace detail

inline std::string format(const Formula& f) {
    std::string out;
    detail::format_rec(f, out, 0, false);
    return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    FormulaPtr parse() {
        FormulaPtr f = parse_or();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return f;
    }

private:
    FormulaPtr parse_or() {
        FormulaPtr f = parse_and();
        while (peek() == '|') {
            ++pos_;
            f = Formula::disj(std::move(f), parse_and());
        }
        return f;
    }

    FormulaPtr parse_and() {
        FormulaPtr f = parse_unary();
        while (peek() == '&') {
            ++pos_;
            f = Formula::conj(std::move(f), parse_unary());
        }
        return f;
    }

    FormulaPtr parse_unary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("expected a formula");
        char c = text_[pos_];
        if (c == '!') {
            ++pos_;
            return Formula::negation(parse_unary());
        }
        if (c == '(') {
            ++pos_;
            FormulaPtr f = parse_or();
            expect(')');
            return f;
        }
        if (c == 'F' || c == 'G' || c == 'U') {
            ++pos_;
            TimeBound b = parse_bound();
            expect('(');
            FormulaPtr lhs = parse_or();
            if (c == 'U') {
                expect(',');
                FormulaPtr rhs = parse_or();
                expect(')');
                return Formula::until(b, std::move(lhs), std::move(rhs));
            }
            expect(')');
            return c == 'F' ? Formula::finally_(b, std::move(lhs))
                            : Formula::globally(b, std::move(lhs));
        }
        if (c == 'N') {
            ++pos_;
            expect('(');
            FormulaPtr f = parse_or();
            expect(')');
            return Formula::next(std::move(f));
        }
        if (std::islower(static_cast<unsigned char>(c))) return parse_ap();
        fail("unexpected character '" + std::string(1, c) + "'");
    }

    FormulaPtr parse_ap() {
        std::size_t start = pos_;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            if (std::islower(static_cast<unsigned char>(c)) ||
                std::isdigit(static_cast<unsigned char>(c)) || c == '_')
                ++pos_;
            else
                break;
        }
        return Formula::ap(text_.substr(start, pos_ - start));
    }

    TimeBound parse_bound() {
        expect('[');
        Year lo = parse_nat();
        expect(',');
        Year hi = parse_nat();
        expect(']');
        if (lo > hi)
            fail("time bound [" + std::to_string(lo) + "," + std::to_string(hi) + "] is reversed");
        return {lo, hi};
    }

    Year parse_nat() {
        skip_ws();
        std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ == start) fail("expected a number");
        return std::stoll(text_.substr(start, pos_ - start));
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != c)
            fail("expected '" + std::string(1, c) + "'");
        ++pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    [[noreturn]] void fail(const std::string& msg) {
        throw Error("parse error at position " + std::to_string(pos_) + ": " + msg);
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline FormulaPtr parse_mtl(const std::string& text) { return detail::Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Point semantics

// Named events with their year intervals. Event intervals lie inside the
// universe; evaluation looking past its upper edge sees no event as holding.
struct History {
    std::map<std::string, std::vector<Span>> events;
    Span universe{1, 2024};

    void add_event(const std::string& name, Year start, Year end) {
        if (start > end) throw Error("event " + name + " has reversed bounds");
        events[name].push_back({start, end});
    }
};

namespace detail {

struct EvalCache {
    // One truth row per formula node, indexed by t - base. -1 = not computed.
    std::map<const Formula*, std::vector<signed char>> rows;
    Year base = 0;
    Year extent = 0;
};

inline bool eval_rec(const History& h, const Formula& f, Year t, EvalCache* cache) {
    signed char* slot = nullptr;
    if (cache && t >= cache->base && t < cache->base + cache->extent) {
        auto& row = cache->rows[&f];
        if (row.empty()) row.assign(static_cast<std::size_t>(cache->extent), -1);
        slot = &row[static_cast<std::size_t>(t - cache->base)];
        if (*slot >= 0) return *slot != 0;
    }
    bool result = false;
    switch (f.op()) {
        case Op::ap: {
            auto it = h.events.find(f.name());
            if (it == h.events.end()) throw Error("unknown event '" + f.name() + "'");
            for (const Span& sp : it->second)
                if (sp.contains(t)) {
                    result = true;
                    break;
                }
            break;
        }
        case Op::finally_:
            for (Year d = f.bound().lo; d <= f.bound().hi && !result; ++d)
                result = eval_rec(h, *f.lhs(), t + d, cache);
            break;
        case Op::globally: {
            result = true;
            for (Year d = f.bound().lo; d <= f.bound().hi && result; ++d)
                result = eval_rec(h, *f.lhs(), t + d, cache);
            break;
        }
        case Op::until:
            for (Year d = f.bound().lo; d <= f.bound().hi && !result; ++d) {
                if (!eval_rec(h, *f.rhs(), t + d, cache)) continue;
                bool hold = true;
                for (Year k = t + 1; k < t + d && hold; ++k)
                    hold = eval_rec(h, *f.lhs(), k, cache);
                result = hold;
            }
            break;
        case Op::next: result = eval_rec(h, *f.lhs(), t + 1, cache); break;
        case Op::not_: result = !eval_rec(h, *f.lhs(), t, cache); break;
        case Op::and_:
            result = eval_rec(h, *f.lhs(), t, cache) && eval_rec(h, *f.rhs(), t, cache);
            break;
        case Op::or_:
            result = eval_rec(h, *f.lhs(), t, cache) || eval_rec(h, *f.rhs(), t, cache);
            break;
    }
    if (slot) *slot = result ? 1 : 0;
    return result;
}

}  // namespace detail

inline bool eval_point(const History& h, const Formula& f, Year t) {
    return detail::eval_rec(h, f, t, nullptr);
}

// Exhaustive sweep of the universe under eval_point.
inline IntervalSet validity_set(const History& h, const Formula& f) {
    if (h.universe.lo > h.universe.hi) throw Error("empty universe");
    detail::EvalCache cache;
    cache.base = h.universe.lo;
    cache.extent = h.universe.hi - h.universe.lo + 1 + f.lookahead();
    std::vector<Span> raw;
    for (Year t = h.universe.lo; t <= h.universe.hi; ++t) {
        if (!detail::eval_rec(h, f, t, &cache)) continue;
        if (!raw.empty() && raw.back().hi == t - 1)
            raw.back().hi = t;
        else
            raw.push_back({t, t});
    }
    return IntervalSet::from_spans(std::move(raw));
}

// ---------------------------------------------------------------------------
// Random formula sampling

struct SampleWeights {
    double ap = 1.0;
    double finally_ = 1.0;
    double globally = 1.0;
    double until = 1.0;
    double next = 1.0;
    double not_ = 1.0;
    double and_ = 1.0;
    double or_ = 1.0;
};

struct SamplerConfig {
    int max_depth = 2;
    Year max_bound = 40;
    SampleWeights weights;
};

namespace detail {

inline FormulaPtr sample_rec(std::mt19937_64& rng, const std::vector<std::string>& events,
                             int budget, const SamplerConfig& cfg) {
    auto pick_event = [&]() {
        std::uniform_int_distribution<std::size_t> dist(0, events.size() - 1);
        return events[dist(rng)];
    };
    if (budget <= 1) return Formula::ap(pick_event());

    const SampleWeights& w = cfg.weights;
    const double weights[8] = {w.ap, w.finally_, w.globally, w.until, w.next, w.not_, w.and_, w.or_};
    std::discrete_distribution<int> op_dist(std::begin(weights), std::end(weights));
    int choice = op_dist(rng);

    auto bound = [&]() -> TimeBound {
        std::uniform_int_distribution<Year> lo_dist(0, cfg.max_bound);
        Year lo = lo_dist(rng);
        std::uniform_int_distribution<Year> hi_dist(lo, cfg.max_bound);
        return {lo, hi_dist(rng)};
    };
    auto child = [&]() { return sample_rec(rng, events, budget - 1, cfg); };

    switch (choice) {
        case 0: return Formula::ap(pick_event());
        case 1: return Formula::finally_(bound(), child());
        case 2: return Formula::globally(bound(), child());
        case 3: {
            TimeBound b = bound();
            return Formula::until(b, child(), child());
        }
        case 4: return Formula::next(child());
        case 5: return Formula::negation(child());
        case 6: return Formula::conj(child(), child());
        default: return Formula::disj(child(), child());
    }
}

}  // namespace detail

inline FormulaPtr sample_formula(std::uint64_t rng_seed, const std::vector<std::string>& events,
                                 int max_depth, const SampleWeights& weights, Year max_bound) {
    if (events.empty()) throw Error("cannot sample a formula without events");
    if (max_depth < 1) throw Error("max_depth must be at least 1");
    SamplerConfig cfg{max_depth, max_bound, weights};
    std::mt19937_64 rng(rng_seed);
    return detail::sample_rec(rng, events, max_depth, cfg);
}

inline FormulaPtr sample_formula(std::uint64_t rng_seed, const std::vector<std::string>& events,
                                 const SamplerConfig& cfg) {
    return sample_formula(rng_seed, events, cfg.max_depth, cfg.weights, cfg.max_bound);
}

}  // namespace fchprobe::mtl
