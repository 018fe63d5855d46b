#pragma once

#include <cmath>

namespace rdslab {

inline double wrap01(double x) {
    double r = x - std::floor(x);
    if (r >= 1.0) r -= 1.0;  // guard against floor rounding at the seam
    return r;
}

/// Point on T^2 = R^2/Z^2; coordinates are kept reduced mod 1.
struct TorusPoint {
    double x = 0.0, y = 0.0;

    static TorusPoint reduced(double px, double py) {
        return {wrap01(px), wrap01(py)};
    }
};

/// Shortest signed representative of dx mod 1 in [-1/2, 1/2).
inline double wrap_half(double dx) {
    double r = dx - std::floor(dx + 0.5);
    return r;
}

/// Torus (flat) distance.
inline double torus_dist(const TorusPoint& p, const TorusPoint& q) {
    const double dx = wrap_half(p.x - q.x);
    const double dy = wrap_half(p.y - q.y);
    return std::sqrt(dx * dx + dy * dy);
}

/// Projective angle of a tangent line, reduced mod pi; the unit vector
/// (cos theta, sin theta) spans the line.
struct Direction {
    double theta = 0.0;

    static Direction of_angle(double t) {
        double r = std::fmod(t, M_PI);
        if (r < 0) r += M_PI;
        return {r};
    }
    static Direction of_vector(double vx, double vy) {
        return of_angle(std::atan2(vy, vx));
    }
    double cx() const { return std::cos(theta); }
    double cy() const { return std::sin(theta); }
};

}  // namespace rdslab
