#include <doctest.h>

#include <cmath>

#include "rdslab/coupling.hpp"

using namespace rdslab;

namespace {

// two nearby near-parallel segments, mildly transverse to the vertical cone
std::pair<StandardPair, StandardPair> configured_pairs(double gap) {
    const StandardPair a = StandardPair::ray({0.30, 0.40}, 0.05, 0.08, 1e-3);
    const StandardPair b =
        StandardPair::ray({0.30, 0.40 + gap}, 0.03, 0.08, 1e-3);
    return {a, b};
}

CouplingParams desk_params() {
    CouplingParams p;
    p.N0 = 5;
    p.horizon = 14;
    p.leaf.delta = 0.012;
    p.leaf.mesh = 1e-3;
    p.max_periods = 2;
    p.recovery_max_blocks = 4;
    return p;
}

}  // namespace

TEST_CASE("configuration detection") {
    ConfigurationParams params;
    params.delta = 0.01;
    params.upsilon = 0.0025;
    SUBCASE("identical straight pairs are configured with x = y") {
        const StandardPair p = StandardPair::ray({0.2, 0.3}, 0.1, 0.06, 1e-3);
        const auto res = detect_configuration(p, p, params);
        REQUIRE(std::holds_alternative<Configuration>(res));
        const Configuration& cfg = std::get<Configuration>(res);
        CHECK(torus_dist(cfg.x, cfg.y) == doctest::Approx(0.0));
    }
    SUBCASE("parallel pairs at distance 2 upsilon fail on proximity") {
        const auto [a, b] = configured_pairs(2.0 * params.upsilon);
        const auto res = detect_configuration(a, b, params);
        REQUIRE(std::holds_alternative<ConfigFailure>(res));
        CHECK(std::get<ConfigFailure>(res) == ConfigFailure::proximity);
    }
    SUBCASE("a pair with curvature above e^C fails on regularity") {
        // tight circular arc: curvature 1/r >> e^C
        std::vector<TorusPoint> nodes;
        std::vector<double> logrho;
        const double r = 0.01;
        for (int i = 0; i <= 60; ++i) {
            const double ang = 0.05 * i;
            nodes.push_back(TorusPoint::reduced(0.5 + r * std::cos(ang),
                                                0.5 + r * std::sin(ang)));
            logrho.push_back(0.0);
        }
        const StandardPair arc =
            StandardPair::make(std::move(nodes), std::move(logrho), 1e-3);
        const auto res = detect_configuration(arc, arc, params);
        REQUIRE(std::holds_alternative<ConfigFailure>(res));
        CHECK(std::get<ConfigFailure>(res) == ConfigFailure::regularity);
    }
    SUBCASE("invalid proximity ratio is rejected") {
        ConfigurationParams bad = params;
        bad.upsilon = bad.delta;  // > tau * delta
        const StandardPair p = StandardPair::ray({0.2, 0.3}, 0.1, 0.06, 1e-3);
        CHECK_THROWS_AS(detect_configuration(p, p, bad), std::invalid_argument);
    }
}

TEST_CASE("local coupling ledger closes and stops equal mass") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const WordStream ws(4242, 1, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    auto [a, b] = configured_pairs(0.002);
    ConfigurationParams cp;
    cp.delta = 0.01;
    cp.upsilon = 0.0025;
    cp.cones = calibrate_cones(t, a.nodes[a.nodes.size() / 2], 20, 300, 7);
    const auto det = detect_configuration(a, b, cp);
    REQUIRE(std::holds_alternative<Configuration>(det));

    // equalize masses exactly
    StandardPair pb = b;
    const double corr = std::log(a.mass / pb.mass);
    for (double& lr : pb.logrho) lr += corr;
    pb.mass = a.mass;

    const CouplingParams params = desk_params();
    const LocalCoupleResult res = local_couple(
        t, a, pb, word, std::get<Configuration>(det), params);

    CHECK(res.record.conservation_ok(1e-10));
    CHECK(res.record.residual_monotone());
    CHECK(res.record.initial_mass == doctest::Approx(a.mass));
    // mass floor: the active density never drops below
    // a0_eff prod (1 - e^{-i eta_hat}) rho by construction
    CHECK(res.record.floor_b0 > 0.0);
    CHECK(res.record.floor_b0 <= params.a0 + 1e-12);
    // the strict tempered points are never dropped
    CHECK(res.strict_points_kept);
    // residual bins carry the stopped mass (both sides equal)
    double m1 = 0.0, m2 = 0.0;
    for (const MassPiece& mp : res.residual1) m1 += mp.mass();
    for (const MassPiece& mp : res.residual2) m2 += mp.mass();
    CHECK(m1 == doctest::Approx(res.record.stopped_mass).epsilon(1e-6));
    CHECK(m2 == doctest::Approx(res.record.stopped_mass).epsilon(1e-6));
}

TEST_CASE("local coupling couples a positive fraction on generic words") {
    const MapTuple t = make_cat_pair_shear(0.1);
    auto [a, b] = configured_pairs(0.002);
    StandardPair pb = b;
    const double corr = std::log(a.mass / pb.mass);
    for (double& lr : pb.logrho) lr += corr;
    pb.mass = a.mass;
    ConfigurationParams cp;
    cp.delta = 0.01;
    cp.upsilon = 0.0025;
    cp.cones = calibrate_cones(t, a.nodes[a.nodes.size() / 2], 20, 300, 7);
    const auto det = detect_configuration(a, pb, cp);
    REQUIRE(std::holds_alternative<Configuration>(det));
    const CouplingParams params = desk_params();

    std::size_t coupled_words = 0;
    const std::size_t W = 10;
    for (std::uint64_t w = 0; w < W; ++w) {
        const WordStream ws(777, w, 2);
        auto word = [&](std::uint64_t i) { return ws.symbol(i); };
        const LocalCoupleResult res = local_couple(
            t, a, pb, word, std::get<Configuration>(det), params);
        CHECK(res.record.conservation_ok(1e-10));
        if (res.record.coupled_mass > 0.0) ++coupled_words;
    }
    CHECK(coupled_words >= W / 2);
}

TEST_CASE("coupled recovery stops equal-mass C0-good blocks") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const WordStream ws(13, 8, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    CouplingParams params = desk_params();
    params.recover_C0 = 4.0;
    params.recovery_max_blocks = 6;

    std::vector<MassPiece> f1{{StandardPair::ray({0.2, 0.6}, 0.1, 0.05, 1e-3),
                               1.0, 0}};
    std::vector<MassPiece> f2{{StandardPair::ray({0.7, 0.2}, 0.4, 0.04, 1e-3),
                               1.0, 0}};
    // equalize totals exactly
    f2[0].weight = f1[0].mass() / f2[0].pair.mass;

    const RecoveryResult rr = coupled_recovery(t, f1, f2, word, params);
    for (const auto& bp : rr.matched) {
        CHECK(bp.side1.mass() ==
              doctest::Approx(bp.side2.mass()).epsilon(1e-10));
        CHECK(goodness(bp.side1.pair).R <= params.recover_C0 + 1e-9);
        CHECK(goodness(bp.side2.pair).R <= params.recover_C0 + 1e-9);
    }
    // conservation across matching and carries
    double matched = 0.0, carried1 = 0.0, carried2 = 0.0;
    for (const auto& bp : rr.matched) matched += bp.side1.mass();
    for (const auto& mp : rr.carried1) carried1 += mp.mass();
    for (const auto& mp : rr.carried2) carried2 += mp.mass();
    CHECK(matched + carried1 ==
          doctest::Approx(f1[0].mass()).epsilon(1e-9));
    CHECK(matched + carried2 ==
          doctest::Approx(f2[0].weight * f2[0].pair.mass).epsilon(1e-9));
}

TEST_CASE("full coupling run produces a monotone tail") {
    const MapTuple t = make_cat_pair_shear(0.1);
    auto [a, b] = configured_pairs(0.002);
    StandardPair pb = b;
    const double corr = std::log(a.mass / pb.mass);
    for (double& lr : pb.logrho) lr += corr;
    pb.mass = a.mass;

    CouplingParams params = desk_params();
    const RunResult run = run_coupling(a, pb, t, 2024, 3, params);
    REQUIRE(!run.tail_prob.empty());
    CHECK(run.tail_prob.front() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < run.tail_prob.size(); ++i)
        CHECK(run.tail_prob[i] <= run.tail_prob[i - 1] + 1e-12);
    CHECK(run.record.coupled_mass >= 0.0);
    CHECK(run.record.coupled_mass <= a.mass * (1.0 + 1e-9));
    CHECK(run.record.coupled_mass + run.record.residual_mass ==
          doctest::Approx(a.mass).epsilon(1e-9));
    if (run.record.coupled_mass > 0.0)
        CHECK(run.per_attempt_coupled_fraction > 0.0);
}

TEST_CASE("coupled samples contract forward") {
    const MapTuple t = make_cat_pair_shear(0.1);
    auto [a, b] = configured_pairs(0.002);
    StandardPair pb = b;
    const double corr = std::log(a.mass / pb.mass);
    for (double& lr : pb.logrho) lr += corr;
    pb.mass = a.mass;
    CouplingParams params = desk_params();
    const std::uint64_t seed = 99, stream = 5;
    const RunResult run = run_coupling(a, pb, t, seed, stream, params);
    const WordStream ws(seed, stream, 2);

    std::size_t checked = 0, violations = 0;
    for (const CoupledSample& smp : run.record.samples) {
        TorusPoint fx = smp.x, fu = smp.ux;
        const double d0 = torus_dist(fx, fu);
        if (d0 <= 0.0) continue;
        for (std::size_t k = 1; k <= smp.T; ++k) {
            fx = t[ws.symbol(k - 1)].apply(fx);
            fu = t[ws.symbol(k - 1)].apply(fu);
        }
        ++checked;
        // coupled pairs lie on a common contracting fake leaf at time T
        if (torus_dist(fx, fu) > d0) ++violations;
    }
    if (checked > 0) CHECK(violations * 20 <= checked);  // <= 5%
}
