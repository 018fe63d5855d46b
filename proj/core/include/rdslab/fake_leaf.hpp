#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rdslab/cocycle.hpp"
#include "rdslab/graph_transform.hpp"
#include "rdslab/maps.hpp"
#include "rdslab/torus.hpp"

namespace rdslab {

/// SL(2,R) perturbation bound for the most expanded singular direction:
/// |sin angle(v_A, v_{A+E})| <= 2 sqrt2 ||E|| / ||A||.  Returns (bound,
/// actual angle).  Preconditions: A, A+E in SL(2,R) to 1e-9, ||A|| >= 2,
/// ||E|| <= ||A||/2.
std::pair<double, double> wedin_angle_bound(const Mat2& A, const Mat2& E);

using WordFn = std::function<unsigned(std::uint64_t)>;

struct LeafParams {
    double delta = 0.02;          // target half-length at the base
    double mesh = 1e-3;           // node spacing = one RK4 arc step
    double spline_weight = 1e-6;  // ridge weight of the direction-field fit
    int field_halfcount = 3;      // field sampled on a (2k+1)^2 grid
};

/// Smoothed pushforward direction field at time n: a penalized cubic fit of
/// the angle of Df^n(E^s_n) sampled on a small grid in the image.  Exposes
/// the angle, its gradient, and the divergence of the unit field.
struct SmoothedField {
    TorusPoint center;      // f^n(x)
    double window = 0.0;    // fit window halfwidth
    double coeff[10] = {};  // angle = sum c_k u^i v^j, i+j <= 3 (du, dv local)
    double angle_at(double du, double dv) const;
    std::pair<double, double> gradient_at(double du, double dv) const;
    /// div of X = (cos angle, sin angle) at the offset
    double divergence_at(double du, double dv) const;
    bool inside(double du, double dv) const {
        return std::fabs(du) <= window && std::fabs(dv) <= window;
    }
};

/// Fake stable leaf through x at time n: the pullback under the inverse word
/// of an integral curve of the smoothed direction field through f^n(x).
/// Nodes are arc-length parametrized with spacing <= mesh; the base point
/// sits at nodes[base_index].
struct FakeLeaf {
    TorusPoint base;
    std::size_t time = 0;
    std::vector<TorusPoint> nodes;
    std::size_t base_index = 0;
    Direction tangent_at_base;
    bool truncated = false;  // exited the chart before reaching delta
    double arc_step = 0.0;

    double arc_of(std::size_t i) const {
        return (static_cast<double>(i) - static_cast<double>(base_index)) *
               arc_step;
    }
};

struct LeafError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Builds the smoothed field for (word, x, n); exposed so holonomy batches
/// can share one fit.
SmoothedField smoothed_direction_field(const MapTuple& tuple, const WordFn& word,
                                       const TorusPoint& x, std::size_t n,
                                       const LeafParams& params);

FakeLeaf fake_stable_leaf(const MapTuple& tuple, const WordFn& word,
                          const TorusPoint& x, std::size_t n,
                          const LeafParams& params);

/// Arc-length parameter on `transversal` where the leaf crosses it, refined
/// by bisection to 1e-12 in the parameter; nullopt when the leaf misses.
std::optional<double> leaf_transversal_intersection(const FakeLeaf& leaf,
                                                    const CurveChart& transversal);

/// One holonomy sample: source and image arc parameters plus both Jacobian
/// routes (the cocycle product formula and a finite difference).
struct HolonomySample {
    double source_s = 0.0;
    double image_s = 0.0;
    double jac_formula = 0.0;
    double jac_fd = 0.0;
    bool missed = false;
};

struct HolonomyResult {
    std::vector<HolonomySample> samples;
    std::size_t time = 0;
};

/// Holonomy along time-n fake leaves between two transversals, sampled at
/// the given source arc parameters on T1.
HolonomyResult fake_holonomy(const MapTuple& tuple, const WordFn& word,
                             std::size_t n, const CurveChart& T1,
                             const CurveChart& T2,
                             const std::vector<double>& sources,
                             const LeafParams& params);

}  // namespace rdslab
