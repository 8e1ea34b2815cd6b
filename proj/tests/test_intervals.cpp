#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fchprobe/intervals.hpp"

using namespace fchprobe;
using intervals::IntervalSet;
using intervals::Span;

namespace {

IntervalSet make(std::initializer_list<Span> spans) {
    return IntervalSet::from_spans(std::vector<Span>(spans));
}

// Independent membership-based model over a small universe.
std::vector<bool> bitmap(const IntervalSet& s, Span universe) {
    std::vector<bool> out;
    for (Year t = universe.lo; t <= universe.hi; ++t) out.push_back(s.contains(t));
    return out;
}

IntervalSet random_set(std::mt19937_64& rng, Span universe) {
    std::uniform_int_distribution<int> n_spans(0, 4);
    std::uniform_int_distribution<Year> point(universe.lo, universe.hi);
    std::vector<Span> raw;
    int n = n_spans(rng);
    for (int i = 0; i < n; ++i) {
        Year a = point(rng);
        Year b = point(rng);
        if (a > b) std::swap(a, b);
        raw.push_back({a, b});
    }
    return IntervalSet::from_spans(std::move(raw));
}

}  // namespace

TEST_CASE("canonical form sorts, merges overlaps and coalesces adjacency") {
    IntervalSet s = make({{10, 12}, {1, 3}, {4, 6}, {11, 15}});
    REQUIRE(s.spans().size() == 2);
    CHECK(s.spans()[0] == Span{1, 6});
    CHECK(s.spans()[1] == Span{10, 15});
    CHECK(make({{1, 2}, {3, 4}}) == IntervalSet::single(1, 4));
    CHECK_THROWS_AS(IntervalSet::single(3, 1), Error);
}

TEST_CASE("union fixtures") {
    CHECK(intervals::union_of(IntervalSet::single(1812, 1870), IntervalSet::single(1837, 1901)) ==
          IntervalSet::single(1812, 1901));
    IntervalSet x = make({{5, 9}});
    CHECK(intervals::union_of(x, {}) == x);
    CHECK(intervals::union_of({}, x) == x);
}

TEST_CASE("intersection fixtures") {
    CHECK(intervals::intersect(IntervalSet::single(1812, 1870), IntervalSet::single(1837, 1901)) ==
          IntervalSet::single(1837, 1870));
    CHECK(intervals::intersect(IntervalSet::single(1822, 1871), IntervalSet::single(1837, 1901)) ==
          IntervalSet::single(1837, 1871));
    CHECK(intervals::intersect(IntervalSet::single(1, 5), {}).empty());
}

TEST_CASE("complement fixtures") {
    IntervalSet c = intervals::complement(IntervalSet::single(1837, 1901), {1, 2024});
    CHECK(c == make({{1, 1836}, {1902, 2024}}));
    CHECK(intervals::complement({}, {1, 10}) == IntervalSet::single(1, 10));
    CHECK(intervals::complement(IntervalSet::single(1, 10), {1, 10}).empty());
    CHECK_THROWS_AS(intervals::complement(IntervalSet::single(0, 5), {1, 10}), Error);
}

TEST_CASE("membership") {
    CHECK(intervals::member(IntervalSet::single(1797, 1901), 1800));
    CHECK_FALSE(intervals::member(IntervalSet::single(1807, 1851), 1800));
    CHECK_FALSE(intervals::member({}, 1800));
}

TEST_CASE("textual and JSON forms") {
    IntervalSet s = make({{1817, 1861}, {1900, 1901}});
    CHECK(s.to_string() == "[1817,1861] ∪ [1900,1901]");
    CHECK(IntervalSet{}.to_string() == "∅");
    CHECK(s.to_json().dump() == "[[1817,1861],[1900,1901]]");
    CHECK(IntervalSet::from_json(s.to_json()) == s);
}

TEST_CASE("count and nth_point") {
    IntervalSet s = make({{1, 3}, {10, 11}});
    REQUIRE(s.count() == 5);
    CHECK(s.nth_point(0) == 1);
    CHECK(s.nth_point(2) == 3);
    CHECK(s.nth_point(3) == 10);
    CHECK(s.nth_point(4) == 11);
    CHECK_THROWS_AS(s.nth_point(5), Error);
}

TEST_CASE("algebra laws against the membership model") {
    const Span universe{1, 64};
    std::mt19937_64 rng(20240501);
    for (int trial = 0; trial < 300; ++trial) {
        IntervalSet a = random_set(rng, universe);
        IntervalSet b = random_set(rng, universe);
        IntervalSet c = random_set(rng, universe);

        CHECK(intervals::union_of(a, b) == intervals::union_of(b, a));
        CHECK(intervals::intersect(a, b) == intervals::intersect(b, a));
        CHECK(intervals::union_of(a, intervals::union_of(b, c)) ==
              intervals::union_of(intervals::union_of(a, b), c));
        CHECK(intervals::intersect(a, intervals::intersect(b, c)) ==
              intervals::intersect(intervals::intersect(a, b), c));
        CHECK(intervals::intersect(a, intervals::union_of(b, c)) ==
              intervals::union_of(intervals::intersect(a, b), intervals::intersect(a, c)));
        CHECK(intervals::complement(intervals::complement(a, universe), universe) == a);

        // pointwise agreement with the membership model
        auto au = bitmap(a, universe);
        auto bu = bitmap(b, universe);
        auto uni = bitmap(intervals::union_of(a, b), universe);
        auto inter = bitmap(intervals::intersect(a, b), universe);
        auto diff = bitmap(intervals::difference(a, b), universe);
        for (std::size_t i = 0; i < au.size(); ++i) {
            CHECK(uni[i] == (au[i] || bu[i]));
            CHECK(inter[i] == (au[i] && bu[i]));
            CHECK(diff[i] == (au[i] && !bu[i]));
        }

        // canonical-form invariant after every operation
        for (const IntervalSet* s : {&a, &b}) {
            const auto& spans = s->spans();
            for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
                CHECK(spans[i].lo <= spans[i].hi);
                CHECK(spans[i].hi + 1 < spans[i + 1].lo);
            }
        }
    }
}

TEST_CASE("shift and clip") {
    IntervalSet s = make({{10, 20}, {30, 35}});
    CHECK(s.shift(-9) == make({{1, 11}, {21, 26}}));
    CHECK(s.clip({12, 32}) == make({{12, 20}, {30, 32}}));
    CHECK(s.clip({21, 29}).empty());
}
