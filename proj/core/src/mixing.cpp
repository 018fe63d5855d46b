#include "rdslab/mixing.hpp"

#include <algorithm>
#include <cmath>

#include "rdslab/parallel.hpp"

namespace rdslab {

double Observable::eval(const TorusPoint& pt) const {
    double s = 0.0;
    for (const Mode& m : modes)
        s += m.amplitude *
             std::cos(2.0 * M_PI * (m.p * pt.x + m.q * pt.y) + m.phase);
    return s;
}

double Observable::exact_integral() const {
    double s = 0.0;
    for (const Mode& m : modes)
        if (m.p == 0 && m.q == 0) s += m.amplitude * std::cos(m.phase);
    return s;
}

double Observable::sup_norm() const {
    double s = 0.0;
    for (const Mode& m : modes) s += std::fabs(m.amplitude);
    return s;
}

double Observable::holder_norm() const {
    double s = 0.0;
    for (const Mode& m : modes)
        s += 2.0 * M_PI * std::hypot(m.p, m.q) * std::fabs(m.amplitude);
    return s;
}

int Observable::max_freq() const {
    int f = 0;
    for (const Mode& m : modes)
        f = std::max({f, std::abs(m.p), std::abs(m.q)});
    return f;
}

std::vector<double> correlation_quenched(const MapTuple& tuple,
                                         const WordFn& word,
                                         const Observable& phi,
                                         const Observable& psi,
                                         std::size_t nmax, std::size_t N) {
    if (N < 2 * static_cast<std::size_t>(std::max(phi.max_freq(),
                                                  psi.max_freq())) ||
        N < 2)
        throw AliasingError(
            "correlation_quenched: lattice must resolve twice the highest "
            "mode frequency");

    const double inv = 1.0 / static_cast<double>(N * N);
    std::vector<TorusPoint> pts(N * N);
    std::vector<double> phi_vals(N * N);
    double phi_mean = 0.0, psi_mean = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
            const TorusPoint p{static_cast<double>(i) / N,
                               static_cast<double>(j) / N};
            pts[i * N + j] = p;
            phi_vals[i * N + j] = phi.eval(p);
            phi_mean += phi_vals[i * N + j];
            psi_mean += psi.eval(p);
        }
    }
    phi_mean *= inv;
    psi_mean *= inv;

    std::vector<double> series(nmax + 1);
    for (std::size_t n = 0; n <= nmax; ++n) {
        double corr = 0.0;
        for (std::size_t k = 0; k < pts.size(); ++k)
            corr += phi_vals[k] * psi.eval(pts[k]);
        series[n] = corr * inv - phi_mean * psi_mean;
        if (n == nmax) break;
        const MapSpec& f = tuple[word(n)];
        for (TorusPoint& p : pts) p = f.apply(p);
    }
    return series;
}

McSeries correlation_quenched_mc(const MapTuple& tuple, const WordFn& word,
                                 const Observable& phi, const Observable& psi,
                                 std::size_t nmax, std::size_t M,
                                 std::uint64_t seed, std::uint64_t stream) {
    if (M == 0)
        throw std::invalid_argument("correlation_quenched_mc: M must be >= 1");
    const WordStream qrng(seed ^ 0xA5A5A5A5ULL, stream, 1);
    std::vector<TorusPoint> pts(M);
    std::vector<double> phi_vals(M);
    for (std::size_t k = 0; k < M; ++k) {
        pts[k] = {u01(qrng, 2 * k), u01(qrng, 2 * k + 1)};
        phi_vals[k] = phi.eval(pts[k]);
    }
    const double phi_int = phi.exact_integral();
    const double psi_int = psi.exact_integral();

    McSeries out;
    out.c.resize(nmax + 1);
    out.halfwidth.resize(nmax + 1);
    for (std::size_t n = 0; n <= nmax; ++n) {
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            const double v = phi_vals[k] * psi.eval(pts[k]);
            sum += v;
            sum2 += v * v;
        }
        const double mean = sum / static_cast<double>(M);
        const double var =
            std::max(0.0, sum2 / static_cast<double>(M) - mean * mean);
        out.c[n] = mean - phi_int * psi_int;
        out.halfwidth[n] = 1.96 * std::sqrt(var / static_cast<double>(M));
        if (n == nmax) break;
        const MapSpec& f = tuple[word(n)];
        for (TorusPoint& p : pts) p = f.apply(p);
    }
    return out;
}

AnnealedResult correlation_annealed(const MapTuple& tuple, std::uint64_t seed,
                                    std::uint64_t stream_base, std::size_t W,
                                    const Observable& phi, const Observable& psi,
                                    std::size_t nmax, std::size_t N) {
    AnnealedResult res;
    res.quenched.resize(W);
    parallel_for(W, [&](std::size_t w) {
        const WordStream ws(seed, stream_base + w,
                            static_cast<unsigned>(tuple.size()));
        res.quenched[w] = correlation_quenched(
            tuple, [&ws](std::uint64_t i) { return ws.symbol(i); }, phi, psi,
            nmax, N);
    });
    res.annealed.assign(nmax + 1, 0.0);
    for (std::size_t w = 0; w < W; ++w)
        for (std::size_t n = 0; n <= nmax; ++n)
            res.annealed[n] += res.quenched[w][n];
    for (double& v : res.annealed) v /= static_cast<double>(W);
    return res;
}

MixingFit rate_fit(const std::vector<double>& series, double floor) {
    MixingFit mf;
    if (series.empty()) return mf;
    // Fit window: the decaying head before the quadrature-noise plateau.
    // The plateau level is the median of the tail; the window ends at the
    // last n that dips well below it (whole series when nothing does).
    std::vector<double> tail;
    const std::size_t tail_len = std::max<std::size_t>(3, series.size() / 3);
    for (std::size_t n = series.size() - std::min(tail_len, series.size());
         n < series.size(); ++n)
        tail.push_back(std::fabs(series[n]));
    const double plateau = median_of(tail);
    std::size_t n_end = series.size() - 1;
    for (std::size_t n = series.size(); n-- > 0;) {
        if (std::fabs(series[n]) < plateau / 50.0) {
            n_end = n;
            break;
        }
    }
    std::vector<double> ns, cs;
    for (std::size_t n = 0; n <= n_end; ++n) {
        ns.push_back(static_cast<double>(n));
        cs.push_back(std::fabs(series[n]));
    }
    const LineFit lf = fit_log_linear(ns, cs, floor);
    mf.degenerate = lf.degenerate;
    mf.npoints = lf.npoints;
    mf.window = {0, n_end};
    if (!lf.degenerate) {
        mf.eta_hat = -lf.slope;
        mf.C_hat = std::exp(lf.intercept);
        mf.r2 = lf.r2;
    }
    return mf;
}

CwTail c_omega_tail(const MapTuple& tuple, const Observable& phi,
                    const Observable& psi, std::size_t nmax, std::size_t W,
                    std::uint64_t seed, std::uint64_t stream_base,
                    std::size_t N, double floor) {
    if (W < 30)
        throw std::invalid_argument("c_omega_tail: need at least 30 words");
    const AnnealedResult runs =
        correlation_annealed(tuple, seed, stream_base, W, phi, psi, nmax, N);

    std::vector<double> etas;
    for (const auto& series : runs.quenched) {
        const MixingFit mf = rate_fit(series, floor);
        if (!mf.degenerate && mf.eta_hat > 0.0) etas.push_back(mf.eta_hat);
    }
    if (etas.size() < W / 2)
        throw std::runtime_error("c_omega_tail: too few non-degenerate fits");

    CwTail tail;
    tail.eta_median = median_of(etas);
    for (const auto& series : runs.quenched) {
        const MixingFit mf = rate_fit(series, floor);
        std::vector<double> ns, cs;
        for (std::size_t n = 0; n <= mf.window.second && n < series.size(); ++n) {
            ns.push_back(static_cast<double>(n));
            cs.push_back(std::fabs(series[n]));
        }
        const double ic =
            fit_log_intercept_fixed_slope(ns, cs, -tail.eta_median, floor);
        if (std::isfinite(ic)) tail.per_word_C.push_back(std::exp(ic));
    }
    std::vector<double> sorted = tail.per_word_C;
    std::sort(sorted.begin(), sorted.end());
    const double lo = std::max(sorted.front(), 1e-300);
    const double hi = sorted.back();
    const int gridpts = 24;
    for (int g = 0; g < gridpts; ++g) {
        const double C =
            lo * std::pow(hi / lo, static_cast<double>(g) / (gridpts - 1));
        const std::size_t above = sorted.end() -
                                  std::lower_bound(sorted.begin(), sorted.end(), C);
        tail.C_grid.push_back(C);
        tail.survival.push_back(static_cast<double>(above) /
                                static_cast<double>(sorted.size()));
    }
    tail.loglog = fit_log_log(tail.C_grid, tail.survival, 1e-9);
    return tail;
}

double equidistribution_error(const MapTuple& tuple, const WordFn& word,
                              const StandardPair& pair, const Observable& phi,
                              std::size_t n) {
    StandardPair unit = pair;
    if (unit.mass <= 0.0)
        throw std::invalid_argument("equidistribution_error: empty pair");
    const double scale = std::log(unit.mass);
    for (double& lr : unit.logrho) lr -= scale;
    unit.mass = 1.0;

    const StandardFamily pushed =
        n == 0 ? [&] {
            StandardFamily f;
            f.add(unit);
            return f;
        }()
               : push_pair(tuple, word, n, unit);
    double integral = 0.0;
    for (std::size_t k = 0; k < pushed.pairs.size(); ++k) {
        const StandardPair& p = pushed.pairs[k];
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
            const double seg = p.arcs[i + 1] - p.arcs[i];
            acc += 0.5 * (phi.eval(p.nodes[i]) * std::exp(p.logrho[i]) +
                          phi.eval(p.nodes[i + 1]) * std::exp(p.logrho[i + 1])) *
                   seg;
        }
        integral += pushed.weights[k] * acc;
    }
    return std::fabs(integral - phi.exact_integral());
}

}  // namespace rdslab
