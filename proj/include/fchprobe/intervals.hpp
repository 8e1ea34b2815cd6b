#pragma once

// Canonical sets of disjoint closed integer year-intervals.
//
// Canonical form: spans sorted ascending, pairwise disjoint, and maximally
// coalesced (adjacent integer spans like [1,2] and [3,4] merge into [1,4]).
// The empty set is the empty span list. All operations return canonical sets.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace fchprobe {

using Year = std::int64_t;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace intervals {

struct Span {
    Year lo = 0;
    Year hi = 0;

    bool contains(Year t) const { return lo <= t && t <= hi; }
    Year count() const { return hi - lo + 1; }
    bool operator==(const Span&) const = default;
};

class IntervalSet {
public:
    IntervalSet() = default;

    static IntervalSet single(Year lo, Year hi) {
        if (lo > hi)
            throw Error("interval [" + std::to_string(lo) + "," + std::to_string(hi) +
                        "] is reversed");
        IntervalSet s;
        s.spans_.push_back({lo, hi});
        return s;
    }

    static IntervalSet from_spans(std::vector<Span> raw) {
        for (const Span& sp : raw) {
            if (sp.lo > sp.hi)
                throw Error("interval [" + std::to_string(sp.lo) + "," +
                            std::to_string(sp.hi) + "] is reversed");
        }
        std::sort(raw.begin(), raw.end(),
                  [](const Span& a, const Span& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
        IntervalSet s;
        for (const Span& sp : raw) {
            if (!s.spans_.empty() && sp.lo <= s.spans_.back().hi + 1)
                s.spans_.back().hi = std::max(s.spans_.back().hi, sp.hi);
            else
                s.spans_.push_back(sp);
        }
        return s;
    }

    const std::vector<Span>& spans() const { return spans_; }
    bool empty() const { return spans_.empty(); }

    // Number of integer points covered.
    Year count() const {
        Year n = 0;
        for (const Span& sp : spans_) n += sp.count();
        return n;
    }

    bool contains(Year t) const {
        // Spans are sorted; find the first span ending at or after t.
        auto it = std::lower_bound(spans_.begin(), spans_.end(), t,
                                   [](const Span& sp, Year v) { return sp.hi < v; });
        return it != spans_.end() && it->contains(t);
    }

    // The k-th covered point, 0-based. Throws if k is out of range.
    Year nth_point(Year k) const {
        for (const Span& sp : spans_) {
            if (k < sp.count()) return sp.lo + k;
            k -= sp.count();
        }
        throw Error("nth_point index out of range");
    }

    IntervalSet shift(Year delta) const {
        IntervalSet s;
        s.spans_ = spans_;
        for (Span& sp : s.spans_) {
            sp.lo += delta;
            sp.hi += delta;
        }
        return s;
    }

    IntervalSet clip(Span range) const {
        IntervalSet s;
        for (const Span& sp : spans_) {
            Year lo = std::max(sp.lo, range.lo);
            Year hi = std::min(sp.hi, range.hi);
            if (lo <= hi) s.spans_.push_back({lo, hi});
        }
        return s;
    }

    bool operator==(const IntervalSet&) const = default;

    std::string to_string() const {
        if (spans_.empty()) return "∅";
        std::string out;
        for (std::size_t i = 0; i < spans_.size(); ++i) {
            if (i) out += " ∪ ";
            out += "[" + std::to_string(spans_[i].lo) + "," + std::to_string(spans_[i].hi) + "]";
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const Span& sp : spans_) j.push_back({sp.lo, sp.hi});
        return j;
    }

    static IntervalSet from_json(const nlohmann::json& j) {
        std::vector<Span> raw;
        for (const auto& pair : j) {
            if (!pair.is_array() || pair.size() != 2)
                throw Error("interval-set JSON entries must be [lo,hi] pairs");
            raw.push_back({pair[0].get<Year>(), pair[1].get<Year>()});
        }
        return from_spans(std::move(raw));
    }

private:
    std::vector<Span> spans_;
};

inline IntervalSet union_of(const IntervalSet& a, const IntervalSet& b) {
    std::vector<Span> raw = a.spans();
    raw.insert(raw.end(), b.spans().begin(), b.spans().end());
    return IntervalSet::from_spans(std::move(raw));
}

inline IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
    std::vector<Span> out;
    std::size_t i = 0, j = 0;
    const auto& as = a.spans();
    const auto& bs = b.spans();
    while (i < as.size() && j < bs.size()) {
        Year lo = std::max(as[i].lo, bs[j].lo);
        Year hi = std::min(as[i].hi, bs[j].hi);
        if (lo <= hi) out.push_back({lo, hi});
        if (as[i].hi < bs[j].hi)
            ++i;
        else
            ++j;
    }
    return IntervalSet::from_spans(std::move(out));
}

inline IntervalSet complement(const IntervalSet& a, Span universe) {
    if (universe.lo > universe.hi) throw Error("empty universe");
    std::vector<Span> out;
    Year cursor = universe.lo;
    for (const Span& sp : a.spans()) {
        if (sp.lo < universe.lo || sp.hi > universe.hi)
            throw Error("span " + std::to_string(sp.lo) + ".." + std::to_string(sp.hi) +
                        " lies outside the universe");
        if (sp.lo > cursor) out.push_back({cursor, sp.lo - 1});
        cursor = sp.hi + 1;
    }
    if (cursor <= universe.hi) out.push_back({cursor, universe.hi});
    return IntervalSet::from_spans(std::move(out));
}

// Points of a that are not in b.
inline IntervalSet difference(const IntervalSet& a, const IntervalSet& b) {
    if (a.empty() || b.empty()) return a;
    Year lo = std::min(a.spans().front().lo, b.spans().front().lo);
    Year hi = std::max(a.spans().back().hi, b.spans().back().hi);
    return intersect(a, complement(b.clip({lo, hi}), {lo, hi}));
}

inline bool member(const IntervalSet& a, Year t) { return a.contains(t); }

}  // namespace intervals
}  // namespace fchprobe
