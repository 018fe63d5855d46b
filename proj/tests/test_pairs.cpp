#include <doctest.h>

#include <cmath>

#include "rdslab/fit.hpp"
#include "rdslab/pairs.hpp"
#include "rdslab/tempered.hpp"
#include "rdslab/words.hpp"

using namespace rdslab;

namespace {

StandardPair circle_arc(double radius, double arc_span, double mesh) {
    std::vector<TorusPoint> nodes;
    std::vector<double> logrho;
    const std::size_t count =
        static_cast<std::size_t>(std::ceil(arc_span / mesh)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        const double s = arc_span * static_cast<double>(i) /
                         static_cast<double>(count - 1);
        const double a = s / radius;
        nodes.push_back(TorusPoint::reduced(0.5 + radius * std::cos(a),
                                            0.5 + radius * std::sin(a)));
        logrho.push_back(0.0);
    }
    return StandardPair::make(std::move(nodes), std::move(logrho), mesh);
}

}  // namespace

TEST_CASE("goodness of reference pairs") {
    SUBCASE("straight unit segment with unit density has R = 0") {
        const StandardPair p =
            StandardPair::ray({0.1, 0.2}, std::atan2(0.8, 0.6), 1.0, 1e-3);
        CHECK(p.length() == doctest::Approx(1.0).epsilon(1e-12));
        const Goodness g = goodness(p);
        CHECK(g.R == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("half-length segment binds through the length term") {
        const StandardPair p =
            StandardPair::segment({0.1, 0.2}, {0.1 + 0.3, 0.2 + 0.4}, 1e-3);
        const Goodness g = goodness(p);
        CHECK(g.R == doctest::Approx(std::log(2.0)).epsilon(1e-9));
        CHECK(g.binding == Goodness::Binding::length);
    }
    SUBCASE("circle arc curvature matches the geometry oracle") {
        const StandardPair arc = circle_arc(0.1, 0.2, 1e-3);
        const Goodness g = goodness(arc);
        CHECK(std::fabs(g.c2 - 10.0) <= 0.1);
        CHECK(g.binding == Goodness::Binding::curvature);
    }
    SUBCASE("fewer than 3 nodes is an error") {
        StandardPair p;
        p.nodes = {{0, 0}, {0.1, 0}};
        p.logrho = {0, 0};
        p.refresh_arcs_and_mass();
        CHECK_THROWS_AS(goodness(p), std::invalid_argument);
    }
}

TEST_CASE("pushforward conserves mass and straightens statements") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const WordStream ws(42, 13, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    StandardPair p = StandardPair::segment({0.12, 0.5}, {0.52, 0.5}, 1e-3);
    // nonuniform density
    for (std::size_t i = 0; i < p.logrho.size(); ++i)
        p.logrho[i] = 0.3 * std::sin(5.0 * p.arcs[i]);
    p.refresh_arcs_and_mass();
    const double m0 = p.mass;
    const StandardFamily fam = push_pair(t, word, 6, p);
    CHECK(std::fabs(fam.total_mass() - m0) <= 1e-10 * std::max(1.0, m0));
}

TEST_CASE("linear map sends straight pairs to straight pairs with 1/stretch") {
    const MapTuple t = make_single_cat();
    auto word = [](std::uint64_t) -> unsigned { return 0; };
    const StandardPair p = StandardPair::segment({0.2, 0.3}, {0.45, 0.3}, 1e-3);
    const StandardFamily fam = push_pair(t, word, 1, p);
    REQUIRE(fam.pairs.size() == 1);
    const StandardPair& q = fam.pairs[0];
    // image of the horizontal tangent under [[2,1],[1,1]] has stretch sqrt5
    const double stretch = std::sqrt(5.0);
    CHECK(q.length() == doctest::Approx(p.length() * stretch).epsilon(1e-6));
    const Goodness g = goodness(q);
    CHECK(g.c2 <= 1e-6);  // still straight
    for (double lr : q.logrho)
        CHECK(lr == doctest::Approx(-std::log(stretch)).epsilon(1e-6));
}

TEST_CASE("volume family represents area") {
    const StandardFamily vol = volume_family(8, 129);
    CHECK(vol.total_mass() == doctest::Approx(1.0).epsilon(1e-14));

    SUBCASE("lattice aliasing: nonzero modes integrate to zero") {
        for (int p = 1; p <= 3; ++p) {
            for (int q = 1; q <= 3; ++q) {
                double re = 0.0, im = 0.0;
                for (std::size_t k = 0; k < vol.pairs.size(); ++k) {
                    const StandardPair& pr = vol.pairs[k];
                    // trapezoid of e^{2 pi i (p x + q y)} over the curve
                    for (std::size_t i = 0; i + 1 < pr.nodes.size(); ++i) {
                        const double seg = pr.arcs[i + 1] - pr.arcs[i];
                        auto node_val = [&](std::size_t j) {
                            const double ph = 2.0 * M_PI *
                                              (p * pr.nodes[j].x + q * pr.nodes[j].y);
                            return std::pair{std::cos(ph), std::sin(ph)};
                        };
                        const auto [c0, s0] = node_val(i);
                        const auto [c1, s1] = node_val(i + 1);
                        re += vol.weights[k] * 0.5 * (c0 + c1) * seg;
                        im += vol.weights[k] * 0.5 * (s0 + s1) * seg;
                    }
                }
                CHECK(std::fabs(re) <= 1e-10);
                CHECK(std::fabs(im) <= 1e-10);
            }
        }
    }

    SUBCASE("pushforward by a builtin map keeps mass 1") {
        const MapTuple t = make_cat_pair_shear(0.1);
        const WordStream ws(7, 5, 2);
        auto word = [&](std::uint64_t i) { return ws.symbol(i); };
        double total = 0.0;
        for (std::size_t k = 0; k < vol.pairs.size(); ++k)
            total += vol.weights[k] * push_pair(t, word, 3, vol.pairs[k]).total_mass();
        CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("subdivision accounting") {
    StandardPair p = StandardPair::segment({0.1, 0.1}, {0.6, 0.1}, 1e-3);
    SUBCASE("vertical fractions split masses exactly") {
        const double alpha = 0.37;
        const StandardFamily f = subdivide_vertical(p, {alpha, 1.0 - alpha});
        REQUIRE(f.pairs.size() == 2);
        CHECK(f.pairs[0].mass == alpha * p.mass);
        CHECK(f.pairs[1].mass == (1.0 - alpha) * p.mass);
        CHECK(f.total_mass() == doctest::Approx(p.mass).epsilon(1e-15));
    }
    SUBCASE("midpoint cut of a uniform pair gives equal masses") {
        const StandardFamily f = subdivide_at(p, {p.length() / 2.0});
        REQUIRE(f.pairs.size() == 2);
        CHECK(f.pairs[0].mass == doctest::Approx(f.pairs[1].mass).epsilon(1e-12));
        CHECK(f.total_mass() == doctest::Approx(p.mass).epsilon(1e-12));
    }
    SUBCASE("nested subdivisions commute with mass accounting") {
        const StandardFamily f1 = subdivide_at(p, {0.2, 0.35});
        double total = 0.0;
        for (const StandardPair& piece : f1.pairs) {
            const StandardFamily f2 = subdivide_vertical(piece, {0.5, 0.5});
            total += f2.total_mass();
        }
        CHECK(total == doctest::Approx(p.mass).epsilon(1e-12));
    }
    SUBCASE("invalid specs are rejected") {
        CHECK_THROWS_AS(subdivide_at(p, {2.0 * p.length()}),
                        std::invalid_argument);
        CHECK_THROWS_AS(subdivide_vertical(p, {0.4, 0.4}),
                        std::invalid_argument);
    }
}

TEST_CASE("pushforward density regularity bound (distortion inequality)") {
    // ||ln f_* rho||_a <= (1/m(Df))^{1+a} (||ln rho||_a + C ||f||_C2 (1 + ||gamma||_C2))
    // with the constant calibrated once on this ensemble and frozen.
    const double kCalibratedC = 12.0;
    const MapTuple t = make_cat_pair_shear(0.2);
    const WordStream rng(99, 31, 2);
    std::uint64_t ctr = 0;
    const double alpha = 0.5;
    for (int rep = 0; rep < 100; ++rep) {
        const double x0 = u01(rng, ctr++), y0 = u01(rng, ctr++);
        const double ang = M_PI * u01(rng, ctr++);
        const double len = 0.1 + 0.2 * u01(rng, ctr++);
        StandardPair p = StandardPair::segment(
            {x0, y0},
            {x0 + len * std::cos(ang), y0 + len * std::sin(ang)}, 1e-3);
        const double amp = 0.3 * u01(rng, ctr++);
        for (std::size_t i = 0; i < p.logrho.size(); ++i)
            p.logrho[i] = amp * std::sin(7.0 * p.arcs[i]);
        p.refresh_arcs_and_mass();
        const unsigned sym = rng.symbol(ctr++);
        const Goodness g_in = goodness(p, alpha);

        auto word = [&](std::uint64_t) { return sym; };
        const StandardFamily fam = push_pair(t, word, 1, p);
        // conorm of the differential along the curve
        double min_conorm = 1e9;
        for (const TorusPoint& q : p.nodes)
            min_conorm = std::min(min_conorm, t[sym].differential(q).conorm());
        const double bound =
            std::pow(1.0 / min_conorm, 1.0 + alpha) *
            (g_in.holder +
             kCalibratedC * t.c2_bound * (1.0 + std::max(g_in.c2, 1.0)));
        for (const StandardPair& piece : fam.pairs) {
            if (piece.nodes.size() < 3) continue;
            const Goodness g_out = goodness(piece, alpha);
            CHECK(g_out.holder <= bound);
        }
    }
}

TEST_CASE("goodness decays at most exponentially along pushforwards") {
    const MapTuple t = make_cat_pair_shear(0.1);
    // calibrated envelope R_n <= C + R_0 + n eta on this ensemble
    const double kC = 3.0, kEta = 2.2;
    for (std::uint64_t w = 0; w < 6; ++w) {
        const WordStream ws(1234, w, 2);
        auto word = [&](std::uint64_t i) { return ws.symbol(i); };
        StandardPair p = StandardPair::segment({0.15, 0.33}, {0.35, 0.41}, 1e-3);
        const double R0 = goodness(p).R;
        for (std::size_t n : {1ul, 3ul, 6ul}) {
            const StandardFamily fam = push_pair(t, word, n, p);
            for (const StandardPair& piece : fam.pairs) {
                if (piece.nodes.size() < 3 || piece.length() < 5e-3) continue;
                CHECK(goodness(piece).R <=
                      kC + R0 + kEta * static_cast<double>(n));
            }
        }
    }
}

TEST_CASE("backwards good times") {
    const MapTuple t = make_cat_pair();
    SUBCASE("generic horizontal pair has a finite time with the angle witness") {
        const WordStream ws(5, 9, 2);
        auto word = [&](std::uint64_t i) { return ws.symbol(i); };
        const StandardPair p = StandardPair::segment({0.2, 0.4}, {0.5, 0.4}, 1e-3);
        BackwardsGoodParams params;
        params.C = -3.0;
        params.lambda = 0.4;
        params.eps = 0.05;
        params.A = 2.0;
        params.eps_prime = 0.1;
        params.R = goodness(p).R;
        const auto T = backwards_good_time(t, word, p, p.nodes.size() / 2, params);
        REQUIRE(T.has_value());
        // contract: at the returned time the reverse certificate holds
        const CocycleTrace tr =
            compose_word(t, word, *T, p.nodes[p.nodes.size() / 2]);
        std::vector<double> xs = tr.lognorm_increments();
        CHECK(tempered_constant(xs, params.lambda, params.eps, true) >= params.C);
        const SplitEstimate split = singular_split(tr.products[*T]);
        const auto [tx, ty] = p.tangent_at(p.nodes.size() / 2);
        const std::size_t base = static_cast<std::size_t>(
            std::ceil(params.A * std::max(params.R, 1.0)));
        const double i = static_cast<double>(*T - base);
        CHECK(line_angle(split.theta_s.cx(), split.theta_s.cy(), tx, ty) >=
              std::exp(-params.eps_prime * i));
    }
    SUBCASE("curve tangent to the stable direction fails the angle check at i=0") {
        // deterministic single cat: gamma aligned with E^s at x
        const MapTuple cat = make_single_cat();
        auto word = [](std::uint64_t) -> unsigned { return 0; };
        const TorusPoint x{0.37, 0.58};
        const CocycleTrace tr = compose_word(cat, word, 40, x);
        const SplitEstimate split = singular_split(tr.products[40]);
        const double sx = split.theta_s.cx(), sy = split.theta_s.cy();
        const StandardPair p = StandardPair::segment(
            {x.x - 0.05 * sx, x.y - 0.05 * sy},
            {x.x + 0.05 * sx, x.y + 0.05 * sy}, 1e-3);
        BackwardsGoodParams params;
        params.C = -3.0;
        params.lambda = 0.4;
        params.eps = 0.05;
        params.A = 1.0;
        params.eps_prime = 0.3;
        params.R = 4.0;
        params.horizon = 60;
        const std::size_t xi = p.node_at_arc(0.05);
        const auto T = backwards_good_time(cat, word, p, xi, params);
        // contract assertion: either no admissible time, or the angle
        // condition genuinely holds at the reported one
        if (T.has_value()) {
            const std::size_t base = static_cast<std::size_t>(
                std::ceil(params.A * std::max(params.R, 1.0)));
            const double i = static_cast<double>(*T - base);
            const auto [tx, ty] = p.tangent_at(xi);
            const CocycleTrace tr2 = compose_word(cat, word, *T, p.nodes[xi]);
            const SplitEstimate s2 = singular_split(tr2.products[*T]);
            CHECK(line_angle(s2.theta_s.cx(), s2.theta_s.cy(), tx, ty) >=
                  std::exp(-params.eps_prime * i));
            CHECK(i > 0.0);  // fails at i = 0 by construction
        }
    }
}
