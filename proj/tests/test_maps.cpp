#include <doctest.h>

#include <cmath>

#include "rdslab/maps.hpp"
#include "rdslab/words.hpp"

using namespace rdslab;

TEST_CASE("linear cat map fixes the origin with its own differential") {
    const MapTuple t = make_single_cat();
    auto [img, df] = t[0].evaluate({0.0, 0.0});
    CHECK(img.x == doctest::Approx(0.0));
    CHECK(img.y == doctest::Approx(0.0));
    CHECK(df.a == 2.0);
    CHECK(df.b == 1.0);
    CHECK(df.c == 1.0);
    CHECK(df.d == 1.0);
}

TEST_CASE("zero shear kick is the identity") {
    MapSpec spec;
    spec.steps.push_back(HShearStep{TrigPoly{}});
    const TorusPoint p{0.37, 0.81};
    auto [img, df] = spec.evaluate(p);
    CHECK(img.x == doctest::Approx(p.x));
    CHECK(img.y == doctest::Approx(p.y));
    CHECK(df.a == 1.0);
    CHECK(df.b == 0.0);
    CHECK(df.c == 0.0);
    CHECK(df.d == 1.0);
}

TEST_CASE("sine kick at the symmetry point") {
    // h(y) = (0.3/2pi) sin(2 pi y): at y = 1/4 the kick is 0.3/(2 pi) and
    // h'(1/4) = 0.3 cos(pi/2) = 0.
    TrigPoly h;
    h.sin_coeff = {0.0, 0.3 / (2.0 * M_PI)};
    MapSpec spec;
    spec.steps.push_back(HShearStep{h});
    auto [img, df] = spec.evaluate({0.25, 0.25});
    CHECK(img.x == doctest::Approx(0.25 + 0.3 / (2.0 * M_PI)));
    CHECK(img.y == doctest::Approx(0.25));
    CHECK(df.a == doctest::Approx(1.0));
    CHECK(df.b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(df.c == doctest::Approx(0.0));
    CHECK(df.d == doctest::Approx(1.0));
}

TEST_CASE("cat_pair has determinant one and cat_pair_shear(0) matches it") {
    const MapTuple pair = make_cat_pair();
    REQUIRE(pair.size() == 2);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(pair[i].differential({0.1, 0.2}).det() == doctest::Approx(1.0));

    const MapTuple sheared = make_cat_pair_shear(0.0);
    const WordStream ws(7, 0, 2);
    TorusPoint a{0.3, 0.6}, b = a;
    for (int i = 0; i < 25; ++i) {
        const unsigned s = ws.symbol(i);
        a = pair[s].apply(a);
        b = sheared[s].apply(b);
    }
    CHECK(a.x == doctest::Approx(b.x).epsilon(1e-12));
    CHECK(a.y == doctest::Approx(b.y).epsilon(1e-12));
}

TEST_CASE("custom map with determinant 2 is rejected") {
    MapSpec bad;
    bad.steps.push_back(LinearStep{Mat2{2, 0, 0, 1}});
    CHECK_THROWS_AS(make_tuple({bad}), MapValidationError);
}

TEST_CASE("volume preservation on random points") {
    const WordStream rng(2024, 1, 1);
    std::uint64_t ctr = 0;
    for (const MapTuple& t :
         {make_single_cat(), make_cat_pair(), make_cat_pair_shear(0.1),
          make_rotations({0.3, 1.1})}) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            for (int k = 0; k < 10000 / 4; ++k) {
                const TorusPoint p{u01(rng, ctr++), u01(rng, ctr++)};
                CHECK(std::fabs(t[i].differential(p).det() - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("inverse consistency in the torus metric") {
    const WordStream rng(5150, 2, 1);
    std::uint64_t ctr = 0;
    for (const MapTuple& t : {make_cat_pair_shear(0.25), make_single_cat()}) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            for (int k = 0; k < 200; ++k) {
                const TorusPoint p{u01(rng, ctr++), u01(rng, ctr++)};
                const TorusPoint round =
                    t[i].apply_inverse(t[i].apply(p));
                CHECK(torus_dist(round, p) <= 1e-10);
            }
        }
    }
}

TEST_CASE("tuple JSON round trip and schema rejection") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const MapTuple u = tuple_from_json(tuple_to_json(t));
    REQUIRE(u.size() == t.size());
    const TorusPoint p{0.21, 0.77};
    for (std::size_t i = 0; i < t.size(); ++i) {
        CHECK(torus_dist(t[i].apply(p), u[i].apply(p)) <= 1e-15);
    }
    CHECK_THROWS_AS(tuple_from_json(R"({"family":"cat_pair","bogus":1})"),
                    MapValidationError);
    CHECK_THROWS_AS(tuple_from_json(R"({"family":"no_such_family"})"),
                    MapValidationError);
    CHECK(tuple_from_json(R"({"family":"cat_pair_shear","params":{"K":0.1}})")
              .c2_bound == doctest::Approx(t.c2_bound));
}

TEST_CASE("c2 bound dominates sampled second differences") {
    const MapTuple t = make_cat_pair_shear(0.4);
    // The l^1 bound must dominate the lattice supremum of the second
    // derivative of the composite map (sampled via the shear coefficients).
    for (const MapSpec& spec : t.maps) {
        CHECK(spec.c2_bound() >= 0.4 * 2.0 * M_PI - 1e-9);
        CHECK(spec.c1_bound() >= spec.differential({0.3, 0.9}).norm() - 1e-9);
    }
}
