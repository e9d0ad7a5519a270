#include <catch2/catch_amalgamated.hpp>

#include "conftree/dyadic.hpp"

using namespace conftree;

TEST_CASE("dyadic normalization and equality") {
    CHECK(Dyadic::make(4, 2) == Dyadic::from_int(1));
    CHECK(Dyadic::make(6, 1) == Dyadic::from_int(3));
    CHECK(Dyadic::make(3, 2) == Dyadic::make(3, 2));
    CHECK(Dyadic::make(0, 7) == Dyadic::from_int(0));
    CHECK(Dyadic::make(-4, 1) == Dyadic::from_int(-2));
}

TEST_CASE("dyadic midpoint stays dyadic and exact") {
    const Dyadic a = Dyadic::make(1, 1);   // 1/2
    const Dyadic b = Dyadic::make(3, 2);   // 3/4
    const Dyadic m = midpoint(a, b);       // 5/8
    CHECK(m == Dyadic::make(5, 3));
    CHECK(m.to_double() == 0.625);

    // Midpoint of equal points is the point.
    CHECK(midpoint(a, a) == a);
}

TEST_CASE("dyadic comparison across exponents") {
    CHECK(compare(Dyadic::make(1, 1), Dyadic::make(3, 2)) < 0);   // 1/2 < 3/4
    CHECK(compare(Dyadic::make(1, 0), Dyadic::make(15, 4)) > 0);  // 1 > 15/16
    CHECK(compare(Dyadic::make(-1, 1), Dyadic::make(-3, 2)) > 0); // -1/2 > -3/4
}

TEST_CASE("orientation predicate is exact") {
    const DyadicPoint o{Dyadic::from_int(0), Dyadic::from_int(0)};
    const DyadicPoint e1{Dyadic::from_int(1), Dyadic::from_int(0)};
    const DyadicPoint e2{Dyadic::from_int(0), Dyadic::from_int(1)};
    CHECK(orient(o, e1, e2) == 1);
    CHECK(orient(o, e2, e1) == -1);
    const DyadicPoint mid{Dyadic::make(1, 1), Dyadic::make(1, 1)};
    const DyadicPoint one{Dyadic::from_int(1), Dyadic::from_int(1)};
    CHECK(orient(o, mid, one) == 0);  // collinear on the diagonal
}

TEST_CASE("segment containment") {
    const DyadicPoint a{Dyadic::from_int(0), Dyadic::from_int(0)};
    const DyadicPoint b{Dyadic::from_int(1), Dyadic::from_int(1)};
    const DyadicPoint p{Dyadic::make(1, 2), Dyadic::make(1, 2)};
    const DyadicPoint q{Dyadic::make(3, 2), Dyadic::make(3, 2)};
    CHECK(on_segment(p, a, b));
    CHECK(segment_contains(a, b, p, q));
    CHECK(segment_contains(a, b, a, b));
    // A sub-segment on the same line but outside.
    const DyadicPoint r{Dyadic::from_int(-1), Dyadic::from_int(-1)};
    CHECK_FALSE(on_segment(r, a, b));
    CHECK_FALSE(segment_contains(a, b, r, p));
    // Not collinear.
    const DyadicPoint s{Dyadic::make(1, 2), Dyadic::make(1, 1)};
    CHECK_FALSE(on_segment(s, a, b));
}

TEST_CASE("signed area is exact for dyadic points") {
    const DyadicPoint a{Dyadic::make(-1, 1), Dyadic::make(-1, 1)};
    const DyadicPoint b{Dyadic::from_int(0), Dyadic::make(-1, 1)};
    const DyadicPoint c{Dyadic::from_int(0), Dyadic::from_int(0)};
    CHECK(signed_area2(a, b, c) == 0.25);
}

TEST_CASE("exponent budget is enforced") {
    CHECK_THROWS_AS(midpoint(Dyadic::make(1, 60), Dyadic::make(1, 60)),
                    std::overflow_error);
}
