#include "rdslab/fake_leaf.hpp"

#include <cmath>

namespace rdslab {

std::pair<double, double> wedin_angle_bound(const Mat2& A, const Mat2& E) {
    const Mat2 AE = A + E;
    if (std::fabs(A.det() - 1.0) > 1e-9 || std::fabs(AE.det() - 1.0) > 1e-9)
        throw std::invalid_argument("wedin_angle_bound: inputs must be SL(2,R)");
    const double na = A.norm();
    if (na < 2.0)
        throw std::invalid_argument("wedin_angle_bound: ||A|| must be >= 2");
    const double ne = E.norm();
    if (ne > na / 2.0)
        throw std::invalid_argument("wedin_angle_bound: ||E|| must be <= ||A||/2");
    const double bound = 2.0 * std::sqrt(2.0) * ne / na;
    const SingularDirections sa = singular_directions(A);
    const SingularDirections sae = singular_directions(AE);
    const double actual =
        line_angle(sa.vmax_x, sa.vmax_y, sae.vmax_x, sae.vmax_y);
    return {bound, actual};
}

double SmoothedField::angle_at(double du, double dv) const {
    const double U = du / window, V = dv / window;
    const double b[10] = {1.0,   U,     V,     U * U, U * V,
                          V * V, U * U * U, U * U * V, U * V * V, V * V * V};
    double s = 0.0;
    for (int i = 0; i < 10; ++i) s += coeff[i] * b[i];
    return s;
}

std::pair<double, double> SmoothedField::gradient_at(double du,
                                                     double dv) const {
    const double U = du / window, V = dv / window;
    const double dU[10] = {0, 1, 0, 2 * U, V, 0, 3 * U * U, 2 * U * V, V * V, 0};
    const double dV[10] = {0, 0, 1, 0, U, 2 * V, 0, U * U, 2 * U * V, 3 * V * V};
    double gu = 0.0, gv = 0.0;
    for (int i = 0; i < 10; ++i) {
        gu += coeff[i] * dU[i];
        gv += coeff[i] * dV[i];
    }
    return {gu / window, gv / window};
}

double SmoothedField::divergence_at(double du, double dv) const {
    // X = (cos theta, sin theta): div X = -sin theta d theta/du + cos theta d theta/dv
    const double th = angle_at(du, dv);
    const auto [gu, gv] = gradient_at(du, dv);
    return -std::sin(th) * gu + std::cos(th) * gv;
}

namespace {

// Forward push of a base point: image point and the renormalized product.
std::pair<TorusPoint, ScaledMat> push_forward(const MapTuple& tuple,
                                              const WordFn& word,
                                              TorusPoint y, std::size_t n) {
    ScaledMat prod;
    for (std::size_t i = 0; i < n; ++i) {
        auto [img, df] = tuple[word(i)].evaluate(y);
        y = img;
        prod.absorb(df);
    }
    return {y, prod};
}

TorusPoint pull_back(const MapTuple& tuple, const WordFn& word, TorusPoint z,
                     std::size_t n) {
    for (std::size_t i = n; i-- > 0;) z = tuple[word(i)].apply_inverse(z);
    return z;
}

// Direction of Df^n(E^s_n) at the image point: most expanded input direction
// of the inverse product, computed through the adjugate so ill-scaled
// products stay well conditioned.
std::pair<double, double> pushed_stable_direction(const ScaledMat& prod) {
    const SingularDirections sd = singular_directions(prod.mat.adjugate());
    return {sd.vmax_x, sd.vmax_y};
}

// 10x10 normal-equation solve (Gaussian elimination, partial pivoting).
void solve10(double A[10][10], double b[10], double out[10]) {
    int idx[10];
    for (int i = 0; i < 10; ++i) idx[i] = i;
    for (int col = 0; col < 10; ++col) {
        int piv = col;
        for (int r = col + 1; r < 10; ++r)
            if (std::fabs(A[idx[r]][col]) > std::fabs(A[idx[piv]][col])) piv = r;
        std::swap(idx[col], idx[piv]);
        const double d = A[idx[col]][col];
        for (int r = col + 1; r < 10; ++r) {
            const double f = A[idx[r]][col] / d;
            for (int c = col; c < 10; ++c) A[idx[r]][c] -= f * A[idx[col]][c];
            b[idx[r]] -= f * b[idx[col]];
        }
    }
    for (int col = 9; col >= 0; --col) {
        double s = b[idx[col]];
        for (int c = col + 1; c < 10; ++c) s -= A[idx[col]][c] * out[c];
        out[col] = s / A[idx[col]][col];
    }
}

}  // namespace

SmoothedField smoothed_direction_field(const MapTuple& tuple, const WordFn& word,
                                       const TorusPoint& x, std::size_t n,
                                       const LeafParams& params) {
    auto [z0, prod0] = push_forward(tuple, word, x, n);
    const double L = prod0.lognorm();
    if (L < std::log(2.0))
        throw LeafError("fake leaf: ||Df^n|| < 2, product too weak");

    SmoothedField field;
    field.center = z0;
    const double h_fit = std::min(1e-3, std::exp(-L));
    const int K = params.field_halfcount;
    field.window = static_cast<double>(K) * h_fit;

    // Sample the pushed stable direction on the grid and unwrap mod pi
    // against the center angle.
    const auto [cx, cy] = pushed_stable_direction(prod0);
    const double theta_c = std::atan2(cy, cx);
    std::vector<double> us, vs, thetas;
    for (int i = -K; i <= K; ++i) {
        for (int j = -K; j <= K; ++j) {
            const TorusPoint w = TorusPoint::reduced(
                z0.x + static_cast<double>(i) * h_fit,
                z0.y + static_cast<double>(j) * h_fit);
            const TorusPoint y = pull_back(tuple, word, w, n);
            const auto [img, prod] = push_forward(tuple, word, y, n);
            (void)img;
            const auto [dx, dy] = pushed_stable_direction(prod);
            double th = std::atan2(dy, dx);
            while (th - theta_c > M_PI / 2) th -= M_PI;
            while (th - theta_c < -M_PI / 2) th += M_PI;
            us.push_back(static_cast<double>(i) * h_fit / field.window);
            vs.push_back(static_cast<double>(j) * h_fit / field.window);
            thetas.push_back(th);
        }
    }

    // Penalized least squares for the cubic angle surface; ridge weight on
    // the quadratic and cubic terms plays the smoothing-spline role.
    double A[10][10] = {};
    double rhs[10] = {};
    for (std::size_t s = 0; s < thetas.size(); ++s) {
        const double U = us[s], V = vs[s];
        const double b[10] = {1.0,   U,     V,     U * U, U * V,
                              V * V, U * U * U, U * U * V, U * V * V, V * V * V};
        for (int r = 0; r < 10; ++r) {
            rhs[r] += b[r] * thetas[s];
            for (int c = 0; c < 10; ++c) A[r][c] += b[r] * b[c];
        }
    }
    for (int k = 3; k < 10; ++k) A[k][k] += params.spline_weight;
    solve10(A, rhs, field.coeff);
    return field;
}

namespace {

struct FieldEval {
    bool ok = false;
    double ux = 0.0, uy = 0.0;  // unit pulled-back field direction
};

// w_n(y): direction of (Df^n)^{-1} Vtilde(f^n(y)).  Image offsets outside
// the fit window are clamped to its edge: the inverse differential collapses
// direction perturbations by e^{-2 ln||Df^n||}, so the clamped lookup leaves
// the pulled-back direction within that collapse factor of the true field.
FieldEval eval_base_field(const MapTuple& tuple, const WordFn& word,
                          const TorusPoint& y, std::size_t n,
                          const SmoothedField& field) {
    auto [z, prod] = push_forward(tuple, word, y, n);
    double du = wrap_half(z.x - field.center.x);
    double dv = wrap_half(z.y - field.center.y);
    du = std::clamp(du, -field.window, field.window);
    dv = std::clamp(dv, -field.window, field.window);
    const double th = field.angle_at(du, dv);
    const Mat2 adj = prod.mat.adjugate();
    const auto pb = adj.apply(std::cos(th), std::sin(th));
    const double nrm = std::hypot(pb[0], pb[1]);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) return {};
    return {true, pb[0] / nrm, pb[1] / nrm};
}

}  // namespace

FakeLeaf fake_stable_leaf(const MapTuple& tuple, const WordFn& word,
                          const TorusPoint& x, std::size_t n,
                          const LeafParams& params) {
    const SmoothedField field = smoothed_direction_field(tuple, word, x, n, params);

    FakeLeaf leaf;
    leaf.base = x;
    leaf.time = n;
    leaf.arc_step = params.mesh;

    const FieldEval f0 = eval_base_field(tuple, word, x, n, field);
    if (!f0.ok) throw LeafError("fake leaf: field undefined at the base point");
    leaf.tangent_at_base = Direction::of_vector(f0.ux, f0.uy);

    // Arc-length RK4 march of y' = w_n(y) to each side; every stage keeps the
    // orientation of the previous tangent.  The chart guard stops the march
    // when the curve leaves the base neighborhood.
    const double chart_radius = 3.0 * params.delta;
    auto march = [&](double sx, double sy) {
        std::vector<TorusPoint> out;
        TorusPoint y = x;
        double px = sx, py = sy;
        const double h = params.mesh;
        const std::size_t steps =
            static_cast<std::size_t>(std::ceil(params.delta / h));
        for (std::size_t s = 0; s < steps; ++s) {
            if (torus_dist(y, x) > chart_radius) return std::pair{out, true};
            auto stage = [&](const TorusPoint& p) -> FieldEval {
                FieldEval e = eval_base_field(tuple, word, p, n, field);
                if (!e.ok) return e;
                if (e.ux * px + e.uy * py < 0.0) {
                    e.ux = -e.ux;
                    e.uy = -e.uy;
                }
                return e;
            };
            const FieldEval k1 = stage(y);
            if (!k1.ok) return std::pair{out, true};
            const FieldEval k2 = stage(TorusPoint::reduced(
                y.x + 0.5 * h * k1.ux, y.y + 0.5 * h * k1.uy));
            if (!k2.ok) return std::pair{out, true};
            const FieldEval k3 = stage(TorusPoint::reduced(
                y.x + 0.5 * h * k2.ux, y.y + 0.5 * h * k2.uy));
            if (!k3.ok) return std::pair{out, true};
            const FieldEval k4 =
                stage(TorusPoint::reduced(y.x + h * k3.ux, y.y + h * k3.uy));
            if (!k4.ok) return std::pair{out, true};
            y = TorusPoint::reduced(
                y.x + h / 6.0 * (k1.ux + 2 * k2.ux + 2 * k3.ux + k4.ux),
                y.y + h / 6.0 * (k1.uy + 2 * k2.uy + 2 * k3.uy + k4.uy));
            px = k4.ux;
            py = k4.uy;
            out.push_back(y);
        }
        return std::pair{out, false};
    };

    auto [right, trunc_r] = march(f0.ux, f0.uy);
    auto [left, trunc_l] = march(-f0.ux, -f0.uy);
    leaf.truncated = trunc_r || trunc_l;

    leaf.nodes.reserve(left.size() + right.size() + 1);
    for (auto it = left.rbegin(); it != left.rend(); ++it) leaf.nodes.push_back(*it);
    leaf.base_index = leaf.nodes.size();
    leaf.nodes.push_back(x);
    for (const TorusPoint& p : right) leaf.nodes.push_back(p);
    return leaf;
}

std::optional<double> leaf_transversal_intersection(
    const FakeLeaf& leaf, const CurveChart& transversal) {
    const double c = std::cos(transversal.frame_angle);
    const double s = std::sin(transversal.frame_angle);
    auto chart_coords = [&](const TorusPoint& p) {
        const double rx = wrap_half(p.x - transversal.origin_x);
        const double ry = wrap_half(p.y - transversal.origin_y);
        return std::pair{rx * c + ry * s, -rx * s + ry * c};
    };
    auto gap = [&](const TorusPoint& p) -> std::optional<double> {
        const auto [xi, psi] = chart_coords(p);
        if (xi < transversal.x0 || xi > transversal.x1) return std::nullopt;
        return psi - transversal.phi_at(xi);
    };
    for (std::size_t i = 0; i + 1 < leaf.nodes.size(); ++i) {
        const auto g0 = gap(leaf.nodes[i]);
        const auto g1 = gap(leaf.nodes[i + 1]);
        if (!g0 || !g1) continue;
        if (*g0 == 0.0) return chart_coords(leaf.nodes[i]).first;
        if ((*g0 < 0) == (*g1 < 0)) continue;
        // Bisection on the segment parameter to 1e-12 of arc length.
        const TorusPoint a = leaf.nodes[i];
        const double dx = wrap_half(leaf.nodes[i + 1].x - a.x);
        const double dy = wrap_half(leaf.nodes[i + 1].y - a.y);
        double lo = 0.0, hi = 1.0;
        const bool low_neg = (*g0 < 0);
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const TorusPoint pm =
                TorusPoint::reduced(a.x + mid * dx, a.y + mid * dy);
            const auto gm = gap(pm);
            if (!gm) break;
            if ((*gm < 0) == low_neg)
                lo = mid;
            else
                hi = mid;
        }
        const double t = 0.5 * (lo + hi);
        const TorusPoint pc = TorusPoint::reduced(a.x + t * dx, a.y + t * dy);
        return chart_coords(pc).first;
    }
    return std::nullopt;
}

namespace {

// ln of the arc-length stretch of f^n along a curve through p with unit
// tangent t, plus the transported unit tangent at time n.
struct TangentTransport {
    double log_stretch = 0.0;
    double tx = 1.0, ty = 0.0;
    TorusPoint image;
};

TangentTransport transport_tangent(const MapTuple& tuple, const WordFn& word,
                                   TorusPoint p, double tx, double ty,
                                   std::size_t n) {
    TangentTransport out;
    double vx = tx, vy = ty;
    for (std::size_t i = 0; i < n; ++i) {
        auto [img, df] = tuple[word(i)].evaluate(p);
        p = img;
        const auto iv = df.apply(vx, vy);
        const double nrm = std::hypot(iv[0], iv[1]);
        vx = iv[0] / nrm;
        vy = iv[1] / nrm;
        out.log_stretch += std::log(nrm);
    }
    out.tx = vx;
    out.ty = vy;
    out.image = p;
    return out;
}

}  // namespace

HolonomyResult fake_holonomy(const MapTuple& tuple, const WordFn& word,
                             std::size_t n, const CurveChart& T1,
                             const CurveChart& T2,
                             const std::vector<double>& sources,
                             const LeafParams& params) {
    HolonomyResult result;
    result.time = n;
    const double h_fd = std::max(1e-5, params.mesh / 8.0);

    auto holonomy_image = [&](double s) -> std::optional<double> {
        const auto [yx, yy] = T1.ambient_at(s);
        const FakeLeaf leaf = fake_stable_leaf(
            tuple, word, TorusPoint::reduced(yx, yy), n, params);
        return leaf_transversal_intersection(leaf, T2);
    };

    for (double s : sources) {
        HolonomySample sample;
        sample.source_s = s;
        const auto [yx, yy] = T1.ambient_at(s);
        const TorusPoint y = TorusPoint::reduced(yx, yy);

        FakeLeaf leaf;
        try {
            leaf = fake_stable_leaf(tuple, word, y, n, params);
        } catch (const LeafError&) {
            sample.missed = true;
            result.samples.push_back(sample);
            continue;
        }
        const auto hit = leaf_transversal_intersection(leaf, T2);
        if (!hit) {
            sample.missed = true;
            result.samples.push_back(sample);
            continue;
        }
        sample.image_s = *hit;

        // Product-formula Jacobian: forward tangent stretches along both
        // orbits, times the smooth-foliation holonomy Jacobian at time n
        // (exact divergence identity for a unit direction field:
        //  Jac = exp(int div X) sin a1 / sin a2).
        const auto [t1x, t1y] = T1.ambient_tangent_at(s);
        const auto [t2x, t2y] = T2.ambient_tangent_at(*hit);
        const auto [y2x, y2y] = T2.ambient_at(*hit);
        const TangentTransport tr1 = transport_tangent(tuple, word, y, t1x, t1y, n);
        const TangentTransport tr2 = transport_tangent(
            tuple, word, TorusPoint::reduced(y2x, y2y), t2x, t2y, n);

        const SmoothedField field =
            smoothed_direction_field(tuple, word, y, n, params);
        const double du1 = wrap_half(tr1.image.x - field.center.x);
        const double dv1 = wrap_half(tr1.image.y - field.center.y);
        const double du2 = wrap_half(tr2.image.x - field.center.x);
        const double dv2 = wrap_half(tr2.image.y - field.center.y);
        const double th1 = field.angle_at(du1, dv1);
        const double th2 = field.inside(du2, dv2) ? field.angle_at(du2, dv2) : th1;
        const double sin1 =
            std::sin(line_angle(tr1.tx, tr1.ty, std::cos(th1), std::sin(th1)));
        const double sin2 =
            std::sin(line_angle(tr2.tx, tr2.ty, std::cos(th2), std::sin(th2)));
        // travel along the connecting leaf from z to w
        const double sx = wrap_half(tr2.image.x - tr1.image.x);
        const double sy = wrap_half(tr2.image.y - tr1.image.y);
        const double mid_u = 0.5 * (du1 + du2), mid_v = 0.5 * (dv1 + dv2);
        double div_int = 0.0;
        if (field.inside(mid_u, mid_v)) {
            const double thm = field.angle_at(mid_u, mid_v);
            const double tau = sx * std::cos(thm) + sy * std::sin(thm);
            div_int = field.divergence_at(mid_u, mid_v) * tau;
        }
        const double jac_pi = std::exp(div_int) * (sin1 / sin2);
        sample.jac_formula =
            std::exp(tr1.log_stretch - tr2.log_stretch) * jac_pi;

        // Finite-difference Jacobian for cross-validation.
        const auto up = holonomy_image(s + h_fd);
        const auto dn = holonomy_image(s - h_fd);
        if (up && dn) {
            // convert chart-x differences to arc-length on both sides
            const double darc1 =
                2.0 * h_fd * std::hypot(1.0, T1.dphi_at(s));
            const double darc2 =
                (*up - *dn) * std::hypot(1.0, T2.dphi_at(*hit));
            sample.jac_fd = std::fabs(darc2 / darc1);
        } else {
            sample.jac_fd = std::nan("");
        }
        result.samples.push_back(sample);
    }
    return result;
}

}  // namespace rdslab
