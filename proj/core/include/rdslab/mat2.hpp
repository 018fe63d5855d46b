#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace rdslab {

/// 2x2 real matrix, row-major. Everything downstream is planar, so all the
/// spectral/singular machinery is closed-form.
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // [[a,b],[c,d]]

    static Mat2 identity() { return {}; }

    friend Mat2 operator*(const Mat2& m, const Mat2& n) {
        return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d,
                m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d};
    }
    friend Mat2 operator*(double s, const Mat2& m) {
        return {s * m.a, s * m.b, s * m.c, s * m.d};
    }
    friend Mat2 operator+(const Mat2& m, const Mat2& n) {
        return {m.a + n.a, m.b + n.b, m.c + n.c, m.d + n.d};
    }
    friend Mat2 operator-(const Mat2& m, const Mat2& n) {
        return {m.a - n.a, m.b - n.b, m.c - n.c, m.d - n.d};
    }

    std::array<double, 2> apply(double x, double y) const {
        return {a * x + b * y, c * x + d * y};
    }

    double det() const { return a * d - b * c; }

    Mat2 inverse() const {
        const double dt = det();
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    Mat2 transposed() const { return {a, c, b, d}; }

    /// Adjugate [[d,-b],[-c,a]]: proportional to the inverse, safe for
    /// direction-only pullbacks of ill-scaled products.
    Mat2 adjugate() const { return {d, -b, -c, a}; }

    double max_abs() const {
        return std::max(std::max(std::fabs(a), std::fabs(b)),
                        std::max(std::fabs(c), std::fabs(d)));
    }

    double frobenius2() const { return a * a + b * b + c * c + d * d; }

    /// Operator (spectral) norm: sigma_1 = sqrt of the large eigenvalue of
    /// M^T M.  For F = ||M||_F^2 and D = det M the eigenvalues of M^T M are
    /// (F +- sqrt(F^2 - 4 D^2))/2.
    double norm() const {
        const double f = frobenius2();
        const double dt = det();
        const double disc = std::max(0.0, f * f - 4.0 * dt * dt);
        return std::sqrt(0.5 * (f + std::sqrt(disc)));
    }

    /// Conorm m(M) = min ||Mv||/||v|| = sigma_2.
    double conorm() const {
        const double f = frobenius2();
        const double dt = det();
        const double disc = std::max(0.0, f * f - 4.0 * dt * dt);
        const double s2sq = 0.5 * (f - std::sqrt(disc));
        return std::sqrt(std::max(0.0, s2sq));
    }

    bool finite() const {
        return std::isfinite(a) && std::isfinite(b) && std::isfinite(c) &&
               std::isfinite(d);
    }
};

/// Singular data of a 2x2 matrix: right singular directions as unit vectors
/// (with exact zero components when M^T M is exactly diagonal, so tracking a
/// singular vector through a diagonal cocycle stays exact) plus their angles
/// in [0, pi).  v_max is the most expanded input direction, v_min the most
/// contracted; they are perpendicular by construction.
struct SingularDirections {
    double vmax_x, vmax_y;
    double vmin_x, vmin_y;
    double theta_max;
    double theta_min;
    double sigma_max;
    double sigma_min;
    bool degenerate;  // sigma_max == sigma_min within tolerance
};

/// Right singular directions from the symmetric matrix M^T M = [[p,q],[q,r]].
inline SingularDirections singular_directions(const Mat2& m,
                                              double tie_tol = 1e-12) {
    const double p = m.a * m.a + m.c * m.c;
    const double q = m.a * m.b + m.c * m.d;
    const double r = m.b * m.b + m.d * m.d;
    const double tr = p + r;
    const double disc = std::sqrt(std::max(0.0, (p - r) * (p - r) + 4 * q * q));
    const double l1 = 0.5 * (tr + disc);
    const double l2 = 0.5 * (tr - disc);
    SingularDirections s{};
    s.sigma_max = std::sqrt(std::max(0.0, l1));
    s.sigma_min = std::sqrt(std::max(0.0, l2));
    s.degenerate = (s.sigma_max - s.sigma_min) <= tie_tol * s.sigma_max;
    if (q == 0.0) {
        const bool row_major = (p >= r);
        s.vmax_x = row_major ? 1.0 : 0.0;
        s.vmax_y = row_major ? 0.0 : 1.0;
        s.vmin_x = row_major ? 0.0 : 1.0;
        s.vmin_y = row_major ? 1.0 : 0.0;
    } else {
        // Eigenvector of [[p,q],[q,r]] for l1: (q, l1 - p) or (l1 - r, q);
        // take the better conditioned of the two.
        double ex1 = q, ey1 = l1 - p;
        double ex2 = l1 - r, ey2 = q;
        double vx, vy;
        if (ex1 * ex1 + ey1 * ey1 >= ex2 * ex2 + ey2 * ey2) {
            vx = ex1;
            vy = ey1;
        } else {
            vx = ex2;
            vy = ey2;
        }
        const double nrm = std::hypot(vx, vy);
        s.vmax_x = vx / nrm;
        s.vmax_y = vy / nrm;
        s.vmin_x = -s.vmax_y;
        s.vmin_y = s.vmax_x;
    }
    double th = std::atan2(s.vmax_y, s.vmax_x);
    if (th < 0) th += M_PI;
    if (th >= M_PI) th -= M_PI;
    double tm = std::atan2(s.vmin_y, s.vmin_x);
    if (tm < 0) tm += M_PI;
    if (tm >= M_PI) tm -= M_PI;
    s.theta_max = th;
    s.theta_min = tm;
    return s;
}

/// Projective distance between two line directions (angles mod pi).
inline double angle_dist(double t1, double t2) {
    double d = std::fabs(t1 - t2);
    d = std::fmod(d, M_PI);
    return std::min(d, M_PI - d);
}

/// Unsigned angle in [0, pi/2] between the lines spanned by two vectors.
inline double line_angle(double x1, double y1, double x2, double y2) {
    const double dot = x1 * x2 + y1 * y2;
    const double crs = x1 * y2 - y1 * x2;
    return std::atan2(std::fabs(crs), std::fabs(dot));
}

}  // namespace rdslab
