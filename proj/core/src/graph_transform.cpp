#include "rdslab/graph_transform.hpp"

#include <algorithm>
#include <cmath>

namespace rdslab {

namespace {

double diff_norm1(const std::vector<double>& v, double h) {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        best = std::max(best, std::fabs(v[i + 1] - v[i]) / h);
    return best;
}

double diff_norm2(const std::vector<double>& v, double h) {
    double best = 0.0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i)
        best = std::max(best,
                        std::fabs(v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h));
    return best;
}

}  // namespace

double CurveChart::norm0() const {
    double best = 0.0;
    for (double p : phi) best = std::max(best, std::fabs(p));
    return best;
}

double CurveChart::norm1() const { return diff_norm1(phi, mesh()); }

double CurveChart::norm2() const { return diff_norm2(phi, mesh()); }

double CurveChart::logrho_holder(double alpha) const {
    const double h = mesh();
    double best = 0.0;
    for (std::size_t i = 0; i < logrho.size(); ++i) {
        for (std::size_t j = i + 1; j < logrho.size(); ++j) {
            const double d = h * static_cast<double>(j - i);
            if (d > 1.0) break;
            best = std::max(best,
                            std::fabs(logrho[j] - logrho[i]) / std::pow(d, alpha));
        }
    }
    return best;
}

namespace {

// 4-point Lagrange interpolation on the uniform mesh; clamps to valid
// windows near the ends.
template <typename Get>
double cubic_interp(double x0, double h, std::size_t n, const Get& get,
                    double x, bool derivative) {
    const double t = (x - x0) / h;
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(std::floor(t));
    i = std::clamp<std::ptrdiff_t>(i - 1, 0, static_cast<std::ptrdiff_t>(n) - 4);
    const double u = t - static_cast<double>(i);  // in [1,2] typically
    const double y0 = get(i), y1 = get(i + 1), y2 = get(i + 2), y3 = get(i + 3);
    // Lagrange basis over nodes 0,1,2,3
    if (!derivative) {
        const double l0 = -(u - 1) * (u - 2) * (u - 3) / 6.0;
        const double l1 = u * (u - 2) * (u - 3) / 2.0;
        const double l2 = -u * (u - 1) * (u - 3) / 2.0;
        const double l3 = u * (u - 1) * (u - 2) / 6.0;
        return y0 * l0 + y1 * l1 + y2 * l2 + y3 * l3;
    }
    const double d0 = -((u - 2) * (u - 3) + (u - 1) * (u - 3) + (u - 1) * (u - 2)) / 6.0;
    const double d1 = ((u - 2) * (u - 3) + u * (u - 3) + u * (u - 2)) / 2.0;
    const double d2 = -((u - 1) * (u - 3) + u * (u - 3) + u * (u - 1)) / 2.0;
    const double d3 = ((u - 1) * (u - 2) + u * (u - 2) + u * (u - 1)) / 6.0;
    return (y0 * d0 + y1 * d1 + y2 * d2 + y3 * d3) / h;
}

}  // namespace

double CurveChart::phi_at(double x) const {
    return cubic_interp(
        x0, mesh(), phi.size(), [&](std::ptrdiff_t i) { return phi[i]; }, x,
        false);
}

double CurveChart::dphi_at(double x) const {
    return cubic_interp(
        x0, mesh(), phi.size(), [&](std::ptrdiff_t i) { return phi[i]; }, x,
        true);
}

double CurveChart::logrho_at(double x) const {
    return cubic_interp(
        x0, mesh(), logrho.size(), [&](std::ptrdiff_t i) { return logrho[i]; },
        x, false);
}

std::pair<double, double> CurveChart::ambient_at(double x) const {
    const double c = std::cos(frame_angle), s = std::sin(frame_angle);
    const double p = phi_at(x);
    return {origin_x + x * c - p * s, origin_y + x * s + p * c};
}

std::pair<double, double> CurveChart::ambient_tangent_at(double x) const {
    const double c = std::cos(frame_angle), s = std::sin(frame_angle);
    const double dp = dphi_at(x);
    const double nrm = std::hypot(1.0, dp);
    return {(c - dp * s) / nrm, (s + dp * c) / nrm};
}

CurveChart CurveChart::straight(double cx, double cy, double angle,
                                double halflen, double h) {
    CurveChart ch;
    ch.x0 = -halflen;
    ch.x1 = halflen;
    const std::size_t count =
        std::max<std::size_t>(5, static_cast<std::size_t>(
                                     std::ceil(2.0 * halflen / h)) + 1);
    ch.phi.assign(count, 0.0);
    ch.logrho.assign(count, 0.0);
    ch.origin_x = cx;
    ch.origin_y = cy;
    ch.frame_angle = angle;
    return ch;
}

LocalMap2 LocalMap2::linear(double s1, double s2) {
    LocalMap2 m;
    m.sigma1 = s1;
    m.sigma2 = s2;
    auto zero = [](double, double) { return 0.0; };
    m.f1 = m.f2 = m.f1x = m.f1y = m.f2x = m.f2y = zero;
    return m;
}

LocalMap2 compose(const LocalMap2& outer, const LocalMap2& inner) {
    LocalMap2 c;
    c.sigma1 = outer.sigma1 * inner.sigma1;
    c.sigma2 = outer.sigma2 * inner.sigma2;
    auto X = [inner](double x, double y) {
        return inner.sigma1 * x + inner.f1(x, y);
    };
    auto Y = [inner](double x, double y) {
        return inner.sigma2 * y + inner.f2(x, y);
    };
    c.f1 = [outer, inner, X, Y](double x, double y) {
        return outer.sigma1 * inner.f1(x, y) + outer.f1(X(x, y), Y(x, y));
    };
    c.f2 = [outer, inner, X, Y](double x, double y) {
        return outer.sigma2 * inner.f2(x, y) + outer.f2(X(x, y), Y(x, y));
    };
    c.f1x = [outer, inner, X, Y](double x, double y) {
        const double xx = X(x, y), yy = Y(x, y);
        return outer.sigma1 * inner.f1x(x, y) +
               outer.f1x(xx, yy) * (inner.sigma1 + inner.f1x(x, y)) +
               outer.f1y(xx, yy) * inner.f2x(x, y);
    };
    c.f1y = [outer, inner, X, Y](double x, double y) {
        const double xx = X(x, y), yy = Y(x, y);
        return outer.sigma1 * inner.f1y(x, y) +
               outer.f1x(xx, yy) * inner.f1y(x, y) +
               outer.f1y(xx, yy) * (inner.sigma2 + inner.f2y(x, y));
    };
    c.f2x = [outer, inner, X, Y](double x, double y) {
        const double xx = X(x, y), yy = Y(x, y);
        return outer.sigma2 * inner.f2x(x, y) +
               outer.f2x(xx, yy) * (inner.sigma1 + inner.f1x(x, y)) +
               outer.f2y(xx, yy) * inner.f2x(x, y);
    };
    c.f2y = [outer, inner, X, Y](double x, double y) {
        const double xx = X(x, y), yy = Y(x, y);
        return outer.sigma2 * inner.f2y(x, y) +
               outer.f2x(xx, yy) * inner.f1y(x, y) +
               outer.f2y(xx, yy) * (inner.sigma2 + inner.f2y(x, y));
    };
    c.eps1 = outer.sigma1 * inner.eps1 + outer.eps1 * (1.0 + inner.eps1 + inner.eps2);
    c.eps2 = outer.sigma2 * inner.eps2 + outer.eps2 * (1.0 + inner.eps1 + inner.eps2);
    const double in1 = std::max(inner.sigma1 + inner.eps1, 1.0 / inner.sigma2 + inner.eps2);
    c.f_c2 = outer.f_c2 * in1 * in1 +
             std::max(outer.sigma1, 1.0 / outer.sigma2) * inner.f_c2 +
             outer.f_c2;
    return c;
}

bool GraphTransformReport::ok(double tol) const {
    // absolute slack covers the second-difference noise floor of the
    // discrete norms
    auto le = [tol](double measured, double bound) {
        return measured <= bound * (1.0 + tol) + 1e-8;
    };
    auto ge = [tol](double measured, double bound) {
        return measured >= bound * (1.0 - tol) - 1e-8;
    };
    if (!ge(len_out, len_bound)) return false;
    if (!le(c0_out, c0_bound)) return false;
    if (!le(c1_out, c1_bound)) return false;
    if (smallness_ok) {
        if (!le(c2_out, c2_bound)) return false;
        if (!le(holder_out, holder_bound)) return false;
    }
    return true;
}

std::pair<CurveChart, GraphTransformReport> graph_transform_step(
    const LocalMap2& F, const CurveChart& chart, double alpha,
    double smallness_cutoff) {
    const double lambda = F.lambda();
    if (!(lambda > 1.0))
        throw GraphTransformError(
            "graph_transform_step: hypothesis min(sigma1, 1/sigma2) > 1 failed");
    if (!(F.eps2 < 1.0 / lambda))
        throw GraphTransformError(
            "graph_transform_step: hypothesis eps2 < 1/lambda failed");
    const double phi1 = chart.norm1();
    const double stretch = lambda - F.eps1 - F.eps1 * phi1;
    if (!(stretch > 0.0))
        throw GraphTransformError(
            "graph_transform_step: main stretching hypothesis lambda - eps1 - "
            "eps1 ||phi||_1 failed");

    // psi^{-1}(x) = sigma1 x + f1(x, phi(x)) is monotone under the stretching
    // hypothesis; the image interval is spanned by the endpoint images.
    auto forward_x = [&](double x) {
        return F.sigma1 * x + F.f1(x, chart.phi_at(x));
    };
    const double X0 = forward_x(chart.x0);
    const double X1 = forward_x(chart.x1);

    CurveChart out;
    out.x0 = X0;
    out.x1 = X1;
    const std::size_t count = std::max<std::size_t>(
        chart.phi.size(),
        static_cast<std::size_t>(std::ceil((X1 - X0) / chart.mesh())) + 1);
    out.phi.resize(count);
    out.logrho.resize(count);

    for (std::size_t k = 0; k < count; ++k) {
        const double X =
            X0 + (X1 - X0) * static_cast<double>(k) / static_cast<double>(count - 1);
        // invert the monotone psi^{-1} by bisection + Newton polish
        double lo = chart.x0, hi = chart.x1;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (forward_x(mid) < X)
                lo = mid;
            else
                hi = mid;
        }
        const double x = 0.5 * (lo + hi);
        const double p = chart.phi_at(x);
        const double dp = chart.dphi_at(x);
        out.phi[k] = F.sigma2 * p + F.f2(x, p);

        // arc-length change of variables for the density:
        // ln rho~(X) = ln rho(x) + ln|dx/dX| + ln||(1,phi')|| - ln||(1,phi~')||
        const double dXdx = F.sigma1 + F.f1x(x, p) + F.f1y(x, p) * dp;
        const double dphit_dx = F.sigma2 * dp + F.f2x(x, p) + F.f2y(x, p) * dp;
        const double dphit = dphit_dx / dXdx;
        out.logrho[k] = chart.logrho_at(x) - std::log(std::fabs(dXdx)) +
                        0.5 * std::log1p(dp * dp) -
                        0.5 * std::log1p(dphit * dphit);
    }

    GraphTransformReport rep;
    rep.lambda = lambda;
    rep.eps1 = F.eps1;
    rep.eps2 = F.eps2;
    rep.alpha = alpha;
    rep.len_out = out.length();
    rep.len_bound = stretch * chart.length();
    rep.c0_out = out.norm0();
    rep.c0_bound = chart.norm0() / lambda + F.eps2;
    rep.c1_out = out.norm1();
    rep.c1_bound = (phi1 / lambda + F.eps2 + F.eps2 * phi1) / stretch;
    rep.c2_out = out.norm2();
    rep.c2_bound = std::pow(lambda, -1.99) * F.f_c2 +
                   std::pow(lambda, -2.99) * chart.norm2();
    rep.holder_out = out.logrho_holder(alpha);
    rep.holder_bound =
        std::pow(lambda, -0.9 * alpha) *
        (chart.logrho_holder(alpha) + F.f_c2 + chart.norm2());
    rep.smallness_ok = F.eps1 < smallness_cutoff && F.eps2 < smallness_cutoff &&
                       phi1 < smallness_cutoff;
    return {std::move(out), rep};
}

}  // namespace rdslab
