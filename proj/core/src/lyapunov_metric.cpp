#include "rdslab/lyapunov_metric.hpp"

#include <cmath>

namespace rdslab {

bool LyapMetricSeq::per_step_ok(double tol) const {
    const double contract = std::exp(-lambda_prime);
    const double expand = std::exp(lambda_prime);
    for (double r : stable_step_ratio)
        if (r > contract * (1.0 + tol)) return false;
    for (double r : unstable_step_ratio)
        if (r < expand * (1.0 - tol)) return false;
    return true;
}

double lyapunov_comparison_bound(double C, double eps, std::size_t i,
                                 double lambda, double lambda_prime) {
    return 4.0 * std::exp(2.0 * C + 2.0 * eps * static_cast<double>(i)) /
           std::sqrt(1.0 - std::exp(2.0 * (lambda_prime - lambda)));
}

namespace {

struct Tracked {
    double x, y;    // unit direction
    double logmag;  // accumulated log magnitude of the transported vector
};

Tracked advance(const Tracked& v, const Mat2& m) {
    const auto im = m.apply(v.x, v.y);
    const double nrm = std::hypot(im[0], im[1]);
    return {im[0] / nrm, im[1] / nrm, v.logmag + std::log(nrm)};
}

}  // namespace

LyapMetricSeq lyapunov_metric(const std::vector<Mat2>& mats, double es_x,
                              double es_y, double eu_x, double eu_y,
                              double lambda, double lambda_prime) {
    if (!(lambda_prime > 0.0) || lambda_prime > lambda)
        throw LyapMetricError("lyapunov_metric: need 0 < lambda' <= lambda");
    const std::size_t n = mats.size();

    LyapMetricSeq seq;
    seq.lambda_prime = lambda_prime;

    // Transport the frame along the cocycle once, logging magnitudes:
    // s_log[i] = ln ||A^i e_s||, u_log[i] = ln ||A^i e_u||.
    std::vector<Tracked> s_frame(n + 1), u_frame(n + 1);
    s_frame[0] = {es_x, es_y, 0.0};
    u_frame[0] = {eu_x, eu_y, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
        s_frame[i + 1] = advance(s_frame[i], mats[i]);
        u_frame[i + 1] = advance(u_frame[i], mats[i]);
    }

    // Definitional sums, evaluated exactly on the finite horizon:
    // ||A_i^l e_s^i|| = exp(s_log[i+l] - s_log[i]);
    // ||[A_{i-l}^l]^{-1} e_u^i|| = exp(u_log[i-l] - u_log[i]).
    seq.stable_norm.resize(n + 1);
    seq.unstable_norm.resize(n + 1);
    seq.es_x.resize(n + 1);
    seq.es_y.resize(n + 1);
    seq.eu_x.resize(n + 1);
    seq.eu_y.resize(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        double ssum = 0.0;
        for (std::size_t l = 0; i + l <= n; ++l) {
            const double log_ratio = s_frame[i + l].logmag - s_frame[i].logmag;
            ssum += std::exp(
                2.0 * (log_ratio + lambda_prime * static_cast<double>(l)));
        }
        double usum = 0.0;
        for (std::size_t l = 0; l <= i; ++l) {
            const double log_ratio = u_frame[i - l].logmag - u_frame[i].logmag;
            usum += std::exp(
                2.0 * (log_ratio + lambda_prime * static_cast<double>(l)));
        }
        seq.stable_norm[i] = std::sqrt(ssum);
        seq.unstable_norm[i] = std::sqrt(usum);
        seq.es_x[i] = s_frame[i].x;
        seq.es_y[i] = s_frame[i].y;
        seq.eu_x[i] = u_frame[i].x;
        seq.eu_y[i] = u_frame[i].y;
    }

    // Per-step ratios ||A_i e||'_{i+1} / ||e||'_i; the transported vector
    // picks up the true stretch exp(log[i+1] - log[i]).
    seq.stable_step_ratio.resize(n);
    seq.unstable_step_ratio.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        seq.stable_step_ratio[i] =
            seq.stable_norm[i + 1] *
            std::exp(s_frame[i + 1].logmag - s_frame[i].logmag) /
            seq.stable_norm[i];
        seq.unstable_step_ratio[i] =
            seq.unstable_norm[i + 1] *
            std::exp(u_frame[i + 1].logmag - u_frame[i].logmag) /
            seq.unstable_norm[i];
    }

    // Comparison with the reference metric, sampled over the unit circle.
    // For xi = a e_s + b e_u the primed length is
    // sqrt((a ||e_s||'_i)^2 + (b ||e_u||'_i)^2): the frame is declared
    // orthogonal for the primed metric.
    seq.comparison_upper.assign(n + 1, 0.0);
    seq.comparison_lower.assign(n + 1,
                                std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i <= n; ++i) {
        const double sx = seq.es_x[i], sy = seq.es_y[i];
        const double ux = seq.eu_x[i], uy = seq.eu_y[i];
        const double det = sx * uy - sy * ux;
        for (int k = 0; k < 64; ++k) {
            const double t = M_PI * static_cast<double>(k) / 64.0;
            const double vx = std::cos(t), vy = std::sin(t);
            const double a = (vx * uy - vy * ux) / det;
            const double b = (sx * vy - sy * vx) / det;
            const double primed =
                std::hypot(a * seq.stable_norm[i], b * seq.unstable_norm[i]);
            seq.comparison_upper[i] = std::max(seq.comparison_upper[i], primed);
            seq.comparison_lower[i] = std::min(seq.comparison_lower[i], primed);
        }
    }
    return seq;
}

}  // namespace rdslab
