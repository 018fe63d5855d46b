#include <doctest.h>

#include <cmath>

#include "rdslab/mixing.hpp"

using namespace rdslab;

TEST_CASE("lattice exactness for nonzero modes") {
    // lattice average of cos(2 pi (p x + q y) + phase) vanishes unless both
    // frequencies vanish mod N
    const std::size_t N = 32;
    for (int p : {1, 3, 7}) {
        for (int q : {0, 2, 5}) {
            double s = 0.0;
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j)
                    s += std::cos(2.0 * M_PI * (p * (double)i / N +
                                                q * (double)j / N) + 0.3);
            CHECK(std::fabs(s) / (N * N) <= 1e-12);
        }
    }
}

TEST_CASE("deterministic cat-map correlations of cos 2 pi x vanish") {
    const MapTuple t = make_single_cat();
    auto word = [](std::uint64_t) -> unsigned { return 0; };
    const Observable phi = Observable::cosine(1, 0);
    const auto series = correlation_quenched(t, word, phi, phi, 20, 512);
    CHECK(series[0] == doctest::Approx(0.5).epsilon(1e-12));
    for (std::size_t n = 1; n <= 20; ++n) CHECK(std::fabs(series[n]) <= 1e-12);
}

TEST_CASE("correlations never exceed the sup-norm product") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const WordStream ws(3, 12, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    Observable phi = Observable::cosine(1, 0, 0.7);
    phi.modes.push_back({2, 1, 0.3, 0.4});
    const Observable psi = Observable::cosine(0, 1, 1.1);
    const auto series = correlation_quenched(t, word, phi, psi, 10, 64);
    for (double c : series)
        CHECK(std::fabs(c) <= phi.sup_norm() * psi.sup_norm() + 1e-12);
}

TEST_CASE("aliasing precondition is enforced") {
    const MapTuple t = make_cat_pair();
    auto word = [](std::uint64_t) -> unsigned { return 0; };
    const Observable hi = Observable::cosine(40, 0);
    CHECK_THROWS_AS(correlation_quenched(t, word, hi, hi, 2, 64), AliasingError);
}

TEST_CASE("symmetry of the n = 0 covariance") {
    const MapTuple t = make_cat_pair();
    const WordStream ws(5, 2, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    const Observable phi = Observable::cosine(1, 0, 0.8);
    const Observable psi = Observable::cosine(1, 1, 0.6, 0.2);
    const auto a = correlation_quenched(t, word, phi, psi, 0, 64);
    const auto b = correlation_quenched(t, word, psi, phi, 0, 64);
    CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-14));
}

TEST_CASE("annealed series is the bitwise mean of the quenched series") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const Observable phi = Observable::cosine(1, 0);
    const AnnealedResult res = correlation_annealed(t, 99, 0, 8, phi, phi, 6, 64);
    for (std::size_t n = 0; n < res.annealed.size(); ++n) {
        double mean = 0.0;
        for (std::size_t w = 0; w < res.quenched.size(); ++w)
            mean += res.quenched[w][n];
        mean /= static_cast<double>(res.quenched.size());
        CHECK(res.annealed[n] == mean);  // bit-for-bit
    }
}

TEST_CASE("rate fit closed forms") {
    SUBCASE("exact exponential") {
        std::vector<double> series;
        for (int n = 0; n <= 30; ++n) series.push_back(3.0 * std::exp(-0.4 * n));
        const MixingFit mf = rate_fit(series);
        REQUIRE(!mf.degenerate);
        CHECK(mf.eta_hat == doctest::Approx(0.4).epsilon(1e-9));
        CHECK(mf.C_hat == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(mf.r2 == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("all-zero series is degenerate") {
        CHECK(rate_fit(std::vector<double>(10, 0.0)).degenerate);
    }
    SUBCASE("noisy series keeps r2 in [0,1]") {
        std::vector<double> series;
        const WordStream rng(1, 1, 1);
        for (int n = 0; n <= 30; ++n)
            series.push_back(std::exp(-0.3 * n) * (0.5 + u01(rng, n)));
        const MixingFit mf = rate_fit(series);
        CHECK(mf.r2 >= 0.0);
        CHECK(mf.r2 <= 1.0);
    }
}

TEST_CASE("c_omega tail survival curve is a valid survival function") {
    const MapTuple t = make_cat_pair_shear(0.1);
    const Observable phi = Observable::cosine(1, 0);
    const CwTail tail = c_omega_tail(t, phi, phi, 20, 32, 7, 0, 64);
    REQUIRE(!tail.survival.empty());
    CHECK(tail.survival.front() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < tail.survival.size(); ++i)
        CHECK(tail.survival[i] <= tail.survival[i - 1] + 1e-12);
    CHECK(tail.survival.back() <= 0.25);
    CHECK(tail.eta_median > 0.0);
    CHECK_THROWS_AS(c_omega_tail(t, phi, phi, 20, 10, 7, 0, 64),
                    std::invalid_argument);
}

TEST_CASE("equidistribution error") {
    const MapTuple t = make_single_cat();
    auto word = [](std::uint64_t) -> unsigned { return 0; };
    SUBCASE("volume segment integrates the pure mode exactly at n = 0") {
        const StandardFamily vol = volume_family(4, 257);
        const Observable phi = Observable::cosine(1, 0);
        const double err = equidistribution_error(t, word, vol.pairs[0], phi, 0);
        CHECK(err <= 1e-10);
    }
    SUBCASE("error is bounded by the sup norm") {
        const StandardPair p = StandardPair::ray({0.3, 0.71}, 0.2, 0.4, 1e-3);
        const Observable phi = Observable::cosine(2, 1, 0.9);
        for (std::size_t n : {0ul, 3ul, 6ul}) {
            CHECK(equidistribution_error(t, word, p, phi, n) <=
                  phi.sup_norm() + 1e-12);
        }
    }
    SUBCASE("horizontal unit pair equidistributes under the cat map") {
        const StandardPair p = StandardPair::ray({0.0, 0.37}, 0.0, 1.0, 5e-4);
        const Observable phi = Observable::cosine(0, 1);
        const double err = equidistribution_error(t, word, p, phi, 10);
        CHECK(err <= 1e-3);
    }
}

TEST_CASE("monte carlo quadrature carries CLT halfwidths") {
    const MapTuple t = make_cat_pair();
    const WordStream ws(17, 4, 2);
    auto word = [&](std::uint64_t i) { return ws.symbol(i); };
    const Observable phi = Observable::cosine(1, 0);
    const McSeries mc = correlation_quenched_mc(t, word, phi, phi, 5, 4000, 11, 0);
    const auto exact = correlation_quenched(t, word, phi, phi, 5, 64);
    for (std::size_t n = 0; n <= 5; ++n) {
        CHECK(mc.halfwidth[n] >= 0.0);
        CHECK(std::fabs(mc.c[n] - exact[n]) <= 3.0 * mc.halfwidth[n] + 0.05);
    }
}
