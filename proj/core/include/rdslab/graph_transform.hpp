#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rdslab {

/// A curve given as a graph over an interval: uniform-mesh samples of phi and
/// of the log-density along the curve.  Discrete norms follow the sampling:
/// ||phi||_1 by central differences, ||phi||_2 by second differences, the
/// log-density Hoelder constant by the max over node pairs within distance 1.
struct CurveChart {
    double x0 = 0.0, x1 = 1.0;
    std::vector<double> phi;
    std::vector<double> logrho;
    // Ambient frame: chart point (x, phi(x)) sits at
    // origin + x * axis + phi(x) * axis_perp.
    double origin_x = 0.0, origin_y = 0.0;
    double frame_angle = 0.0;

    double mesh() const {
        return (x1 - x0) / static_cast<double>(phi.size() - 1);
    }
    double length() const { return x1 - x0; }
    double norm0() const;
    double norm1() const;
    double norm2() const;
    double logrho_holder(double alpha) const;

    /// Piecewise-cubic interpolation of phi (4-point Lagrange on the uniform
    /// mesh) and its first derivative.
    double phi_at(double x) const;
    double dphi_at(double x) const;
    double logrho_at(double x) const;

    /// Ambient coordinates of the chart point over x, and the unit tangent.
    std::pair<double, double> ambient_at(double x) const;
    std::pair<double, double> ambient_tangent_at(double x) const;

    /// Straight segment through (cx, cy) with direction `angle`, extending
    /// halflen to each side, with mesh `h` and uniform density.
    static CurveChart straight(double cx, double cy, double angle,
                               double halflen, double h);
};

/// Local hyperbolic map F = (sigma1 x + f1(x,y), sigma2 y + f2(x,y)) with
/// closed-form first partials of the perturbation and certified sup bounds
/// over the working box (suppliers compute them from coefficient sums).
struct LocalMap2 {
    double sigma1 = 2.0;
    double sigma2 = 0.5;
    std::function<double(double, double)> f1, f2;
    std::function<double(double, double)> f1x, f1y, f2x, f2y;
    double eps1 = 0.0;     // sup max(|f1|, |df1|) on the box
    double eps2 = 0.0;     // sup max(|f2|, |df2|) on the box
    double f_c2 = 0.0;     // sup of second partials of (f1, f2)

    double lambda() const { return std::min(sigma1, 1.0 / sigma2); }
    static LocalMap2 linear(double s1, double s2);
};

/// F2 after F1, with chain-rule partials and composed bounds.
LocalMap2 compose(const LocalMap2& outer, const LocalMap2& inner);

/// The four one-step bounds, each as (measured, bound):
///  (1) stretched domain length
///  (2) C0 and C1 smoothing
///  (3) C2 smoothing            (claimed under the smallness cutoff)
///  (4) log-density Hoelder smoothing (same cutoff)
struct GraphTransformReport {
    double lambda = 0.0;
    double eps1 = 0.0, eps2 = 0.0;
    double len_out = 0.0, len_bound = 0.0;
    double c0_out = 0.0, c0_bound = 0.0;
    double c1_out = 0.0, c1_bound = 0.0;
    double c2_out = 0.0, c2_bound = 0.0;
    double holder_out = 0.0, holder_bound = 0.0;
    bool smallness_ok = false;  // eps1, eps2, ||phi||_1 below the cutoff
    double alpha = 0.5;

    /// All applicable inequalities hold up to a relative slack.
    bool ok(double tol = 1e-9) const;
};

struct GraphTransformError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One step of the graph transform: pushes the chart through F, transports
/// the log-density by the arc-length change of variables, and evaluates the
/// four-bound report.  Throws GraphTransformError naming the failed
/// hypothesis (lambda <= 1, eps2 >= 1/lambda, or the main stretching
/// condition lambda - eps1 - eps1 ||phi||_1 <= 0).
std::pair<CurveChart, GraphTransformReport> graph_transform_step(
    const LocalMap2& F, const CurveChart& chart, double alpha = 0.5,
    double smallness_cutoff = 0.05);

}  // namespace rdslab
