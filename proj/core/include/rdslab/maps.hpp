#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rdslab/mat2.hpp"
#include "rdslab/torus.hpp"

namespace rdslab {

/// Trigonometric polynomial  t(u) = sum_k [ a_k cos(2 pi k u) + b_k sin(2 pi k u) ],
/// k = 0..K.  Closed-form derivatives, and l^1 coefficient bounds for the
/// sup norms of t, t', t''.
struct TrigPoly {
    std::vector<double> cos_coeff;  // a_0, a_1, ...
    std::vector<double> sin_coeff;  // b_0 (unused), b_1, ...

    double eval(double u) const;
    double deriv(double u) const;
    double deriv2(double u) const;
    double sup_abs() const;     // sum |a_k| + |b_k|
    double sup_deriv() const;   // sum 2 pi k (|a_k| + |b_k|)
    double sup_deriv2() const;  // sum (2 pi k)^2 (|a_k| + |b_k|)
    bool zero() const;
};

/// One primitive step of an area-preserving torus map.
struct LinearStep {
    Mat2 m;  // must have det == 1 (within 1e-12)
};
struct HShearStep {
    TrigPoly h;  // (x, y) -> (x + h(y), y)
};
struct VShearStep {
    TrigPoly g;  // (x, y) -> (x, y + g(x))
};
using MapStep = std::variant<LinearStep, HShearStep, VShearStep>;

/// An explicit area-preserving map of T^2 given as an ordered composition of
/// primitive steps (step 0 applied first).  Every step has a closed-form
/// inverse and differential, so orbits, cocycles and pullbacks are exact up
/// to rounding.
struct MapSpec {
    std::vector<MapStep> steps;

    /// Image point (reduced mod 1) and the exact chain-rule differential.
    std::pair<TorusPoint, Mat2> evaluate(const TorusPoint& p) const;
    TorusPoint apply(const TorusPoint& p) const;
    Mat2 differential(const TorusPoint& p) const;

    /// Closed-form inverse (steps inverted in reverse order).
    TorusPoint apply_inverse(const TorusPoint& p) const;
    Mat2 differential_inverse(const TorusPoint& p) const;

    /// l^1 coefficient bounds: sup ||Df|| and sup of second-derivative entries.
    double c1_bound() const;
    double c2_bound() const;
};

/// Finite ensemble (f_1, ..., f_m); downstream code samples symbols
/// uniformly.  c1_bound/c2_bound are the precomputed l^1 bounds over the
/// whole tuple.
struct MapTuple {
    std::vector<MapSpec> maps;
    double c1_bound = 1.0;
    double c2_bound = 0.0;

    std::size_t size() const { return maps.size(); }
    const MapSpec& operator[](std::size_t i) const { return maps[i]; }
};

struct MapValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Validates determinants and periodicity, computes the coefficient bounds.
/// Throws MapValidationError on det != 1 or an empty tuple.
MapTuple make_tuple(std::vector<MapSpec> maps);

/// Named families:
///   single_cat       ([[2,1],[1,1]])
///   cat_pair         ([[2,1],[1,1]], [[1,1],[1,2]])
///   cat_pair_shear   cat_pair, each map followed by the horizontal kick
///                    x -> x + (K/2pi) sin(2 pi y)   (sup |h'| = K)
///   rotations        planar rotations by the given angles
MapTuple make_single_cat();
MapTuple make_cat_pair();
MapTuple make_cat_pair_shear(double K);
MapTuple make_rotations(const std::vector<double>& angles);

/// JSON serialization.
///
/// Named family:   {"family": "cat_pair_shear", "params": {"K": 0.1}}
///   - "family": one of "single_cat" (no params), "cat_pair" (no params),
///     "cat_pair_shear" (params.K: real), "rotations" (params.angles:
///     array of reals).
/// Custom tuple:   {"custom": [ {"steps": [ STEP, ... ]}, ... ]}
///   - STEP is one of
///       {"linear": [a, b, c, d]}            row-major, ad - bc = 1
///       {"hshear": {"cos": [...], "sin": [...]}}   trig-poly coefficients
///       {"vshear": {"cos": [...], "sin": [...]}}   (index k = frequency k)
/// Unknown fields are rejected.
MapTuple tuple_from_json(const std::string& json_text);
std::string tuple_to_json(const MapTuple& tuple);

}  // namespace rdslab
