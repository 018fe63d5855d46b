#include "rdslab/tempered.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdslab {

TemperedScan tempered_constant_scan(const std::vector<double>& xs, double lambda,
                                    double eps, bool reverse) {
    if (xs.empty())
        throw std::invalid_argument("tempered_constant: empty sequence");
    std::vector<double> v = xs;
    if (reverse) std::reverse(v.begin(), v.end());

    const std::size_t n = v.size();
    std::vector<double> S(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) S[i + 1] = S[i] + v[i];

    TemperedScan out;
    double best = std::numeric_limits<double>::infinity();
    double minb = std::numeric_limits<double>::infinity();
    std::size_t minb_j = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t j = k - 1;
        const double jd = static_cast<double>(j);
        const double bj = (eps * jd + lambda * jd) - S[j];
        if (bj < minb) {
            minb = bj;
            minb_j = j;
        }
        const double ak = S[k] - lambda * static_cast<double>(k);
        const double term = ak + minb;
        if (term < best) {
            best = term;
            out.argmin_j = minb_j;
            out.argmin_k = k;
        }
    }
    out.c_star = best;
    return out;
}

double tempered_constant(const std::vector<double>& xs, double lambda,
                         double eps, bool reverse) {
    return tempered_constant_scan(xs, lambda, eps, reverse).c_star;
}

double subtempered_norm_constant_lognorms(const std::vector<double>& lognorms,
                                          double lambda, double eps) {
    const std::size_t n = lognorms.size() - 1;
    if (lognorms.empty() || n == 0)
        throw std::invalid_argument("subtempered_norm_constant: need n >= 1");
    double best = std::numeric_limits<double>::infinity();
    double minb = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t j = k - 1;
        const double jd = static_cast<double>(j);
        minb = std::min(minb, (eps * jd + lambda * jd) - lognorms[j]);
        best = std::min(best,
                        (lognorms[k] - lambda * static_cast<double>(k)) + minb);
    }
    return best;
}

namespace {
std::vector<double> product_lognorms(const std::vector<Mat2>& mats) {
    std::vector<double> ln(mats.size() + 1, 0.0);
    ScaledMat p;
    for (std::size_t i = 0; i < mats.size(); ++i) {
        p.absorb(mats[i]);
        ln[i + 1] = p.lognorm();
    }
    return ln;
}
}  // namespace

double subtempered_norm_constant(const std::vector<Mat2>& mats, double lambda,
                                 double eps) {
    return subtempered_norm_constant_lognorms(product_lognorms(mats), lambda,
                                              eps);
}

double cushion_lognorms(const std::vector<double>& lognorms, double C0,
                        double lambda, double eps) {
    const std::size_t n = lognorms.size() - 1;
    if (lognorms.empty() || n == 0)
        throw std::invalid_argument("cushion: need n >= 1");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const double term = lognorms[n] - lognorms[k] - C0 -
                            static_cast<double>(n - k) * lambda +
                            eps * static_cast<double>(k);
        best = std::min(best, term);
    }
    return best;
}

double cushion(const std::vector<Mat2>& mats, double C0, double lambda,
               double eps) {
    return cushion_lognorms(product_lognorms(mats), C0, lambda, eps);
}

SplittingCertificate splitting_certificate(const std::vector<Mat2>& mats,
                                           double C, double lambda,
                                           double eps) {
    SplittingCertificate cert;
    cert.params = {C, lambda, eps};
    const std::size_t n = mats.size();
    if (n == 0) return cert;

    std::vector<ScaledMat> prods(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        prods[i + 1] = prods[i];
        prods[i + 1].absorb(mats[i]);
    }
    const SingularDirections sd = singular_directions(prods[n].mat);
    cert.degenerate = sd.degenerate;

    // Transport unit vectors along the cocycle, keeping magnitudes in logs.
    // Starting from the componentwise singular vectors (exact zeros for
    // diagonal products) avoids seeding the stable direction with rounding
    // noise that the unstable growth would amplify.
    struct TrackedVec {
        double x, y, logmag = 0.0;
        void step(const Mat2& m) {
            const auto im = m.apply(x, y);
            x = im[0];
            y = im[1];
            const double nrm = std::hypot(x, y);
            x /= nrm;
            y /= nrm;
            logmag += std::log(nrm);
        }
    };
    // Degenerate ||A^n|| = 1: the designated default theta_s = pi/2.
    TrackedVec vs = cert.degenerate ? TrackedVec{0.0, 1.0, 0.0}
                                    : TrackedVec{sd.vmin_x, sd.vmin_y, 0.0};
    TrackedVec vu = cert.degenerate ? TrackedVec{1.0, 0.0, 0.0}
                                    : TrackedVec{sd.vmax_x, sd.vmax_y, 0.0};
    std::vector<double> log_s(n + 1, 0.0), log_u(n + 1, 0.0), angle(n + 1);
    angle[0] = line_angle(vs.x, vs.y, vu.x, vu.y);
    for (std::size_t i = 0; i < n; ++i) {
        vs.step(mats[i]);
        vu.step(mats[i]);
        log_s[i + 1] = vs.logmag;
        log_u[i + 1] = vu.logmag;
        angle[i + 1] = line_angle(vs.x, vs.y, vu.x, vu.y);
    }

    // Least admissible C per inequality; track the first violation with the
    // stated C in order of total time k+m (then k, then inequality number).
    double c1 = -std::numeric_limits<double>::infinity();
    double c2 = c1, c3 = c1;
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t m = 1; k + m <= n; ++m) {
            const double du = log_u[k + m] - log_u[k];
            const double ds = log_s[k + m] - log_s[k];
            const double kd = static_cast<double>(k);
            const double md = static_cast<double>(m);
            const double need1 = lambda * md - eps * kd - du;
            const double need2 = ds + lambda * md - eps * kd;
            c1 = std::max(c1, need1);
            c2 = std::max(c2, need2);
            if (!cert.first_violation) {
                if (need1 > C)
                    cert.first_violation = {k + m, 1};
                else if (need2 > C)
                    cert.first_violation = {k + m, 2};
            }
        }
    }
    for (std::size_t k = 0; k <= n; ++k) {
        const double need3 =
            -std::log(std::max(angle[k], 1e-300)) - eps * static_cast<double>(k);
        c3 = std::max(c3, need3);
        if (!cert.first_violation && need3 > C) cert.first_violation = {k, 3};
    }
    cert.best_C_split = std::max(std::max(c1, c2), c3);
    cert.pass = cert.best_C_split <= C;

    // Consecutive singular-direction angles for m >= N0(C_eff), where C_eff
    // is the measured norm-temperedness defect of this word (the stated C
    // may be far more conservative than the word requires, which would push
    // the whole table below the fit floor).
    std::vector<double> lognorms(n + 1, 0.0);
    for (std::size_t i = 0; i <= n; ++i) lognorms[i] = prods[i].lognorm();
    const double c_norm =
        subtempered_norm_constant_lognorms(lognorms, lambda, eps);
    const double Cpos = std::max(-c_norm, 0.0);
    const std::size_t N0 = static_cast<std::size_t>(
        std::ceil((Cpos + std::log(2.0)) / std::max(lambda, 1e-12)));
    std::vector<double> fit_m, fit_gap;
    for (std::size_t m = std::max<std::size_t>(N0, 1); m + 1 <= n; ++m) {
        const SplitEstimate a = singular_split(prods[m]);
        const SplitEstimate b = singular_split(prods[m + 1]);
        if (a.degenerate || b.degenerate) continue;
        const double gap = angle_dist(a.theta_s.theta, b.theta_s.theta);
        cert.angle_m.push_back(m);
        cert.angle_gap.push_back(gap);
        fit_m.push_back(static_cast<double>(m));
        fit_gap.push_back(gap);
    }
    cert.angle_decay = fit_log_linear(fit_m, fit_gap, 1e-12);
    return cert;
}

std::optional<std::size_t> first_failure_time(const std::vector<double>& xs,
                                              double C, double lambda,
                                              double eps) {
    const std::size_t n = xs.size();
    std::vector<double> S(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) S[i + 1] = S[i] + xs[i];
    double minb = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n; ++k) {
        const std::size_t j = k - 1;
        const double jd = static_cast<double>(j);
        minb = std::min(minb, (eps * jd + lambda * jd) - S[j]);
        const double term = (S[k] - lambda * static_cast<double>(k)) + minb;
        if (term < C) return k;
    }
    return std::nullopt;
}

std::optional<std::size_t> reverse_return_time(const std::vector<double>& xs,
                                               std::size_t N, double C0,
                                               double lambda, double eps) {
    const std::size_t n = xs.size();
    for (std::size_t T = std::max<std::size_t>(N, 1); T <= n; ++T) {
        std::vector<double> prefix(xs.begin(), xs.begin() + T);
        if (tempered_constant(prefix, lambda, eps, /*reverse=*/true) >= C0)
            return T;
    }
    return std::nullopt;
}

double azuma_bound(const std::vector<double>& c, double lam) {
    double s2 = 0.0;
    for (double ci : c) {
        if (!(ci > 0)) throw std::invalid_argument("azuma_bound: c_i must be > 0");
        s2 += ci * ci;
    }
    const double val = 2.0 * std::exp(-(lam * lam) / (2.0 * s2));
    return std::min(1.0, val);
}

double DirectionHistogram::bin_width() const {
    return M_PI / static_cast<double>(bins);
}

double DirectionHistogram::tv_distance(const DirectionHistogram& a,
                                       const DirectionHistogram& b) {
    double tv = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        const double pa = static_cast<double>(a.counts[i]) /
                          static_cast<double>(a.total);
        const double pb = static_cast<double>(b.counts[i]) /
                          static_cast<double>(b.total);
        tv += std::fabs(pa - pb);
    }
    return 0.5 * tv;
}

std::vector<double> direction_mass_profile(std::vector<double> samples,
                                           const std::vector<double>& eps_grid) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::vector<double> h(eps_grid.size(), 0.0);
    if (n == 0) return h;
    // Circle of circumference pi; window of width 2 eps via two pointers on
    // the doubled sample list.
    std::vector<double> doubled(samples);
    for (double s : samples) doubled.push_back(s + M_PI);
    for (std::size_t e = 0; e < eps_grid.size(); ++e) {
        const double width = std::min(2.0 * eps_grid[e], M_PI);
        std::size_t best = 0, hi = 0;
        for (std::size_t lo = 0; lo < n; ++lo) {
            if (hi < lo) hi = lo;
            while (hi + 1 < lo + n && doubled[hi + 1] - doubled[lo] <= width)
                ++hi;
            best = std::max(best, hi - lo + 1);
        }
        h[e] = static_cast<double>(best) / static_cast<double>(n);
    }
    return h;
}

DirectionHistogram stable_direction_distribution(
    const MapTuple& tuple, const TorusPoint& x, std::size_t n, std::size_t W,
    std::uint64_t seed, std::uint64_t stream_base, std::size_t bins) {
    DirectionHistogram out;
    out.bins = bins;
    out.counts.assign(bins, 0);

    std::size_t n_try = std::max<std::size_t>(n, 1);
    const std::size_t n_cap = std::max<std::size_t>(4 * n_try, n_try + 40);
    std::vector<double> thetas;
    std::size_t degenerate = 0;
    while (true) {
        thetas.clear();
        degenerate = 0;
        std::size_t grown = 0;
        for (std::size_t w = 0; w < W; ++w) {
            WordStream ws(seed, stream_base + w, static_cast<unsigned>(tuple.size()));
            const CocycleTrace tr = compose_word(tuple, ws, n_try, x);
            if (tr.lognorms[n_try] < std::log(2.0)) ++grown;
            const SplitEstimate split = singular_split(tr.products[n_try]);
            if (split.degenerate) {
                ++degenerate;
                continue;
            }
            thetas.push_back(split.theta_s.theta);
        }
        const double frac_small =
            static_cast<double>(grown) / static_cast<double>(W);
        if (frac_small <= 0.01 || n_try >= n_cap) break;
        n_try = std::min(n_cap, n_try * 2);
    }
    if (degenerate * 20 > W)
        throw std::runtime_error(
            "stable_direction_distribution: degenerate products exceed 5% of "
            "samples");

    out.n_used = n_try;
    out.degenerate_count = degenerate;
    out.samples = thetas;
    for (double t : thetas) {
        std::size_t b = static_cast<std::size_t>(t / out.bin_width());
        if (b >= bins) b = bins - 1;
        out.counts[b]++;
        out.total++;
    }
    for (int p = 3; p <= 10; ++p) out.mass_eps.push_back(std::pow(2.0, -p));
    out.mass_h = direction_mass_profile(thetas, out.mass_eps);
    out.alpha_fit = fit_log_log(out.mass_eps, out.mass_h, 1e-12);
    return out;
}

}  // namespace rdslab
