#include <doctest.h>

#include <cmath>
#include <limits>

#include "rdslab/tempered.hpp"
#include "rdslab/words.hpp"

using namespace rdslab;

namespace {

// O(n^2) reference for the scalar temperedness constant.  Uses the same
// pinned arrangement as the scan so agreement is bitwise.
double brute_tempered_constant(const std::vector<double>& xs, double lambda,
                               double eps, bool reverse = false) {
    std::vector<double> v = xs;
    if (reverse) std::reverse(v.begin(), v.end());
    const std::size_t n = v.size();
    std::vector<double> S(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) S[i + 1] = S[i] + v[i];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
        const double jd = static_cast<double>(j);
        const double bj = (eps * jd + lambda * jd) - S[j];
        for (std::size_t k = j + 1; k <= n; ++k) {
            const double ak = S[k] - lambda * static_cast<double>(k);
            best = std::min(best, ak + bj);
        }
    }
    return best;
}

// O(n^2) reference for the matrix subtempered-norm constant.
double brute_subtempered(const std::vector<Mat2>& mats, double lambda,
                         double eps) {
    std::vector<ScaledMat> prods(mats.size() + 1);
    for (std::size_t i = 0; i < mats.size(); ++i) {
        prods[i + 1] = prods[i];
        prods[i + 1].absorb(mats[i]);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < mats.size(); ++j)
        for (std::size_t i = 1; i + j <= mats.size(); ++i)
            best = std::min(best, prods[i + j].lognorm() - prods[j].lognorm() -
                                      lambda * static_cast<double>(i) +
                                      eps * static_cast<double>(j));
    return best;
}

double brute_cushion(const std::vector<Mat2>& mats, double C0, double lambda,
                     double eps) {
    std::vector<ScaledMat> prods(mats.size() + 1);
    for (std::size_t i = 0; i < mats.size(); ++i) {
        prods[i + 1] = prods[i];
        prods[i + 1].absorb(mats[i]);
    }
    const std::size_t n = mats.size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
        best = std::min(best, prods[n].lognorm() - prods[k].lognorm() - C0 -
                                  static_cast<double>(n - k) * lambda +
                                  eps * static_cast<double>(k));
    return best;
}

std::vector<Mat2> random_sl2_word(std::uint64_t seed, std::size_t n) {
    const WordStream rng(seed, 17, 1);
    std::uint64_t ctr = 0;
    std::vector<Mat2> mats;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = 2.0 * u01(rng, ctr++) - 1.0;
        const double l = 2.0 * u01(rng, ctr++) - 1.0;
        const double s = std::exp(1.2 * u01(rng, ctr++) - 0.2);
        mats.push_back(Mat2{1, u, 0, 1} * Mat2{s, 0, 0, 1 / s} *
                       Mat2{1, 0, l, 1});
    }
    return mats;
}

}  // namespace

TEST_CASE("tempered constant closed forms") {
    SUBCASE("xs identically lambda gives C* = 0") {
        // dyadic values keep the prefix sums exact
        std::vector<double> xs(25, 0.75);
        CHECK(tempered_constant(xs, 0.75, 0.0) == 0.0);
        CHECK(tempered_constant(xs, 0.75, 0.25) == 0.0);
    }
    SUBCASE("all-zero sequence, lambda 1, eps 0: full window") {
        std::vector<double> xs(10, 0.0);
        CHECK(tempered_constant(xs, 1.0, 0.0) == -10.0);
    }
    SUBCASE("empty sequence throws") {
        CHECK_THROWS_AS(tempered_constant({}, 1.0, 0.0), std::invalid_argument);
    }
}

TEST_CASE("scan equals the quadratic oracle bitwise on random sequences") {
    const WordStream rng(314159, 3, 1);
    std::uint64_t ctr = 0;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> xs(200);
        for (double& x : xs) x = 2.0 * u01(rng, ctr++) - 0.8;
        const double lambda = 0.2 + u01(rng, ctr++);
        const double eps = 0.2 * u01(rng, ctr++);
        CHECK(tempered_constant(xs, lambda, eps) ==
              brute_tempered_constant(xs, lambda, eps));
        CHECK(tempered_constant(xs, lambda, eps, true) ==
              brute_tempered_constant(xs, lambda, eps, true));
    }
}

TEST_CASE("subtempered norm constant closed forms and oracle") {
    SUBCASE("exact diagonal growth") {
        std::vector<Mat2> mats(12, Mat2{std::exp(1.0), 0, 0, std::exp(-1.0)});
        CHECK(subtempered_norm_constant(mats, 1.0, 0.0) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("rotations: longest window is binding") {
        std::vector<Mat2> mats(15);
        for (auto& m : mats) m = Mat2{std::cos(0.4), -std::sin(0.4),
                                      std::sin(0.4), std::cos(0.4)};
        const double lambda = 0.5;
        CHECK(subtempered_norm_constant(mats, lambda, 1e-3) ==
              doctest::Approx(-lambda * 15.0).epsilon(1e-9));
    }
    SUBCASE("random SL(2,R) words match the quadratic oracle") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto mats = random_sl2_word(seed, 120);
            CHECK(subtempered_norm_constant(mats, 0.4, 0.02) ==
                  doctest::Approx(brute_subtempered(mats, 0.4, 0.02))
                      .epsilon(1e-10));
        }
    }
}

TEST_CASE("scalar/matrix duality on diagonal cocycles") {
    const WordStream rng(777, 4, 1);
    std::uint64_t ctr = 0;
    std::vector<double> xs(60);
    for (double& x : xs) x = 1.5 * u01(rng, ctr++) - 0.25;
    std::vector<Mat2> mats;
    for (double x : xs) mats.push_back(Mat2{std::exp(x), 0, 0, std::exp(-x)});
    // For diag(e^{x_i}, e^{-x_i}) the product norms are exp of prefix-sum
    // maxima; on a drift-positive sample the constants coincide.
    const double lambda = 0.3, eps = 0.05;
    const double scalar = tempered_constant(xs, lambda, eps);
    const double matrix = subtempered_norm_constant(mats, lambda, eps);
    CHECK(matrix == doctest::Approx(scalar).epsilon(1e-9));
}

TEST_CASE("monotonicity of C* in lambda and eps") {
    const WordStream rng(555, 6, 1);
    std::uint64_t ctr = 0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<double> xs(40);
        for (double& x : xs) x = 2.0 * u01(rng, ctr++) - 0.5;
        const double l1 = 0.2 + 0.5 * u01(rng, ctr++);
        const double l2 = l1 + 0.3 * u01(rng, ctr++);
        const double e1 = 0.2 * u01(rng, ctr++);
        const double e2 = e1 + 0.2 * u01(rng, ctr++);
        CHECK(tempered_constant(xs, l2, e1) <= tempered_constant(xs, l1, e1));
        CHECK(tempered_constant(xs, l1, e2) >= tempered_constant(xs, l1, e1));
    }
}

TEST_CASE("cushion closed forms and oracle") {
    SUBCASE("linear growth attains at k = 0") {
        std::vector<Mat2> mats(20, Mat2{std::exp(0.5), 0, 0, std::exp(-0.5)});
        CHECK(cushion(mats, 0.0, 0.5, 0.0) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(cushion(mats, -5.0, 0.5, 0.0) == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("random cocycles match the quadratic oracle") {
        for (std::uint64_t seed = 40; seed < 55; ++seed) {
            const auto mats = random_sl2_word(seed, 90);
            CHECK(cushion(mats, 0.3, 0.25, 0.01) ==
                  doctest::Approx(brute_cushion(mats, 0.3, 0.25, 0.01))
                      .epsilon(1e-10));
        }
    }
}

TEST_CASE("splitting certificate") {
    SUBCASE("exact diagonal cocycle passes with best_C_split = 0") {
        const double lambda = 0.8;
        std::vector<Mat2> mats(30, Mat2{std::exp(lambda), 0, 0, std::exp(-lambda)});
        // stated C at the rounding floor: best_C_split is 0 up to log/exp noise
        const SplittingCertificate cert =
            splitting_certificate(mats, 1e-9, lambda, 0.0);
        CHECK(cert.pass);
        CHECK(std::fabs(cert.best_C_split) <= 1e-9);
        CHECK(!cert.first_violation.has_value());
    }
    SUBCASE("a rotation block breaks inequality #1 at the block") {
        const double lambda = 0.8;
        std::vector<Mat2> mats;
        for (int i = 0; i < 10; ++i)
            mats.push_back(Mat2{std::exp(lambda), 0, 0, std::exp(-lambda)});
        const double a = M_PI / 2;
        for (int i = 0; i < 20; ++i)
            mats.push_back(Mat2{std::cos(a), -std::sin(a), std::sin(a), std::cos(a)});
        for (int i = 0; i < 10; ++i)
            mats.push_back(Mat2{std::exp(lambda), 0, 0, std::exp(-lambda)});
        const SplittingCertificate cert =
            splitting_certificate(mats, 0.5, lambda, 0.01);
        CHECK(!cert.pass);
        REQUIRE(cert.first_violation.has_value());
        CHECK(cert.first_violation->second == 1);
        // The violation is detected inside the inserted rotation block.
        CHECK(cert.first_violation->first >= 10);
        CHECK(cert.first_violation->first <= 31);
    }
}

TEST_CASE("first failure and reverse return stopping times") {
    SUBCASE("constant-drift sequence never fails for C < 0") {
        std::vector<double> xs(200, 0.6);
        CHECK(!first_failure_time(xs, -1.0, 0.6, 0.0).has_value());
    }
    SUBCASE("an injected dip fails exactly at its position") {
        const double lambda = 0.5, C = -2.0;
        std::vector<double> xs(60, lambda);
        const std::size_t k = 23;
        // One step of size -(2|C| + 2 lambda) makes the (k-1, k) window
        // constraint fail at k while earlier prefixes stay tempered.
        xs[k - 1] = -(2.0 * std::fabs(C) + 2.0 * lambda);
        const auto fail = first_failure_time(xs, C, lambda, 0.0);
        REQUIRE(fail.has_value());
        CHECK(*fail == k);
    }
    SUBCASE("reverse return satisfies its contract") {
        const WordStream rng(2222, 5, 1);
        std::uint64_t ctr = 0;
        std::vector<double> xs(150);
        for (double& x : xs) x = 0.9 * u01(rng, ctr++) + 0.05;
        const std::size_t N = 10;
        const double C0 = -1.0, lambda = 0.2, eps = 0.05;
        const auto T = reverse_return_time(xs, N, C0, lambda, eps);
        REQUIRE(T.has_value());
        CHECK(*T >= N);
        std::vector<double> prefix(xs.begin(), xs.begin() + *T);
        CHECK(tempered_constant(prefix, lambda, eps, true) >= C0);
        // Minimality: no earlier admissible time.
        for (std::size_t t = N; t < *T; ++t) {
            std::vector<double> pre(xs.begin(), xs.begin() + t);
            CHECK(tempered_constant(pre, lambda, eps, true) < C0);
        }
    }
}

TEST_CASE("azuma bound closed forms") {
    std::vector<double> c(100, 1.0);
    CHECK(azuma_bound(c, 30.0) == doctest::Approx(2.0 * std::exp(-4.5)));
    CHECK(azuma_bound(c, 0.0) == 1.0);
    CHECK_THROWS_AS(azuma_bound({0.0}, 1.0), std::invalid_argument);
}

TEST_CASE("azuma bound dominates empirical random walk tails") {
    const WordStream rng(31337, 11, 2);
    const std::size_t trials = 100000, n = 100;
    std::vector<std::size_t> exceed(3, 0);
    const double thresholds[3] = {10.0, 20.0, 30.0};
    for (std::size_t t = 0; t < trials; ++t) {
        int sum = 0;
        for (std::size_t i = 0; i < n; ++i)
            sum += rng.symbol(t * n + i) ? 1 : -1;
        for (int j = 0; j < 3; ++j)
            if (std::fabs(sum) >= thresholds[j]) exceed[j]++;
    }
    std::vector<double> c(n, 1.0);
    for (int j = 0; j < 3; ++j) {
        const double empirical =
            static_cast<double>(exceed[j]) / static_cast<double>(trials);
        CHECK(empirical <= azuma_bound(c, thresholds[j]));
    }
}

TEST_CASE("temperedness tail has an exponential envelope (drift sequences)") {
    // IID increments with positive drift: P(not (-C, lambda1, eps)-tempered)
    // should decay exponentially in C.
    const WordStream rng(909, 21, 1);
    const double lambda0 = 0.5, lambda1 = 0.25, eps = 0.05;
    const std::size_t trials = 2000, n = 80;
    std::vector<double> Cs = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    std::vector<double> fail_prob;
    std::uint64_t ctr = 0;
    std::vector<double> cstars(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> xs(n);
        for (double& x : xs) x = lambda0 + (2.0 * u01(rng, ctr++) - 1.0);
        cstars[t] = tempered_constant(xs, lambda1, eps);
    }
    for (double C : Cs) {
        std::size_t fails = 0;
        for (double cs : cstars)
            if (cs < -C) ++fails;
        fail_prob.push_back(static_cast<double>(fails) / trials);
    }
    const LineFit fit = fit_log_linear(Cs, fail_prob, 1e-6);
    REQUIRE(!fit.degenerate);
    CHECK(fit.slope < 0.0);  // fitted D2 > 0
}

TEST_CASE("stable direction distribution") {
    SUBCASE("single cat concentrates on the stable eigendirection") {
        const MapTuple t = make_single_cat();
        const DirectionHistogram h =
            stable_direction_distribution(t, {0.2, 0.7}, 25, 200, 5, 0, 256);
        // slope of the stable eigenvector (1, (-1-sqrt5)/2)
        const double theta_star =
            Direction::of_vector(1.0, (-1.0 - std::sqrt(5.0)) / 2.0).theta;
        std::size_t hot = 0, hot_count = 0;
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            if (h.counts[b] > hot_count) {
                hot_count = h.counts[b];
                hot = b;
            }
        CHECK(hot_count == h.total);  // one bin holds all mass
        const double bin_center = (static_cast<double>(hot) + 0.5) * h.bin_width();
        CHECK(angle_dist(bin_center, theta_star) <= h.bin_width());
    }
    SUBCASE("base-point independence for the linear cat_pair") {
        const MapTuple t = make_cat_pair();
        const std::size_t W = 1500;
        const DirectionHistogram h1 =
            stable_direction_distribution(t, {0.1, 0.3}, 30, W, 11, 0, 64);
        const DirectionHistogram h2 = stable_direction_distribution(
            t, {0.8, 0.55}, 30, W, 11, 10000, 64);
        const double tv = DirectionHistogram::tv_distance(h1, h2);
        // Bootstrap the TV null from the pooled sample.
        std::vector<double> pooled = h1.samples;
        pooled.insert(pooled.end(), h2.samples.begin(), h2.samples.end());
        const WordStream rng(4242, 0x7, 1);
        std::uint64_t ctr = 0;
        std::vector<double> tvs;
        for (int b = 0; b < 120; ++b) {
            DirectionHistogram a, c;
            a.bins = c.bins = 64;
            a.counts.assign(64, 0);
            c.counts.assign(64, 0);
            for (std::size_t i = 0; i < W; ++i) {
                const double sa =
                    pooled[rng.raw(ctr++) % pooled.size()];
                const double sc =
                    pooled[rng.raw(ctr++) % pooled.size()];
                a.counts[std::min<std::size_t>(
                    63, static_cast<std::size_t>(sa / a.bin_width()))]++;
                a.total++;
                c.counts[std::min<std::size_t>(
                    63, static_cast<std::size_t>(sc / c.bin_width()))]++;
                c.total++;
            }
            tvs.push_back(DirectionHistogram::tv_distance(a, c));
        }
        CHECK(tv <= mean_of(tvs) + 3.0 * stddev_of(tvs));
    }
    SUBCASE("mass profile exponent is positive with a good fit") {
        const MapTuple t = make_cat_pair();
        const DirectionHistogram h =
            stable_direction_distribution(t, {0.4, 0.9}, 30, 4000, 21, 0, 256);
        REQUIRE(!h.alpha_fit.degenerate);
        CHECK(h.alpha_fit.slope > 0.0);
        CHECK(h.alpha_fit.r2 >= 0.9);
    }
}
