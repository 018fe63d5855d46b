#pragma once

#include <optional>
#include <vector>

#include "rdslab/cocycle.hpp"
#include "rdslab/fake_leaf.hpp"
#include "rdslab/maps.hpp"
#include "rdslab/torus.hpp"

namespace rdslab {

/// Standard pair: an arc-length parametrized polyline with a log-density at
/// the nodes and a cached total mass (trapezoid on e^{logrho}).
struct StandardPair {
    std::vector<TorusPoint> nodes;
    std::vector<double> logrho;
    std::vector<double> arcs;  // cumulative arc length per node
    double mass = 0.0;
    double mesh_target = 1e-3;

    static StandardPair make(std::vector<TorusPoint> nodes,
                             std::vector<double> logrho, double mesh_target);
    /// Straight segment from a to b (shortest torus displacement), uniform
    /// density rho = 1.
    static StandardPair segment(const TorusPoint& a, const TorusPoint& b,
                                double mesh_target, std::size_t min_nodes = 9);
    /// Straight pair of the given arc length from a in direction `angle`
    /// (may wind around the torus), uniform density rho = 1.
    static StandardPair ray(const TorusPoint& a, double angle, double length,
                            double mesh_target);

    double length() const { return arcs.empty() ? 0.0 : arcs.back(); }
    double trapezoid_mass() const;
    void refresh_arcs_and_mass();

    /// Unit tangent at a node (symmetric differences inside, one-sided at ends).
    std::pair<double, double> tangent_at(std::size_t i) const;
    /// Node index nearest to arc parameter s.
    std::size_t node_at_arc(double s) const;
    /// Point at arc parameter (linear interpolation).
    TorusPoint point_at_arc(double s) const;
    double logrho_at_arc(double s) const;
};

/// Goodness R = max over the three clamped defect logs; which one binds.
struct Goodness {
    double R = 0.0;
    enum class Binding { length, curvature, density_holder } binding =
        Binding::length;
    double alpha = 0.5;
    double len = 0.0;
    double c2 = 0.0;            // three-point circumradius curvature sup
    double holder = 0.0;        // ||ln rho||_{C^alpha}, pairs within distance 1
};

Goodness goodness(const StandardPair& pair, double alpha = 0.5);

/// Weighted finite family; the induced measure integrates pair measures with
/// the weights.
struct StandardFamily {
    std::vector<StandardPair> pairs;
    std::vector<double> weights;

    double total_mass() const;
    void add(StandardPair pair, double weight = 1.0);
};

/// Pushforward of one pair by n steps of the word: per-step node transport
/// with adaptive refinement, log-density moved by the log arc-length
/// Jacobian, splitting where the image folds (turning angle > pi/2 per node
/// step) or stretches past resolution.  Total mass is conserved (quadrature
/// closure re-normalizes the O(mesh^2) trapezoid drift).
StandardFamily push_pair(const MapTuple& tuple, const WordFn& word,
                         std::size_t n, const StandardPair& pair);

/// N horizontal circles y = (k+1/2)/N with unit density and weight 1/N:
/// total mass exactly 1; represents area on the torus.
StandardFamily volume_family(std::size_t N, std::size_t nodes_per_pair = 257);

/// Partition along the curve at the given arc-length cut points.
StandardFamily subdivide_at(const StandardPair& pair,
                            const std::vector<double>& arc_cuts);

/// Vertical subdivision: pieces (gamma, f_k rho) with the fractions summing
/// to 1; piece masses are fraction * mass exactly.
StandardFamily subdivide_vertical(const StandardPair& pair,
                                  const std::vector<double>& fractions);

struct BackwardsGoodParams {
    double C = -3.0;        // reverse-tempered constant threshold
    double lambda = 0.4;
    double eps = 0.05;
    double A = 2.0;         // time offset factor: n = A max(R,1) + i
    double eps_prime = 0.1; // angle condition angle >= e^{-eps' i}
    double R = 1.0;         // goodness of the ambient pair
    std::size_t horizon = 400;
};

/// First backwards-good time for the node `x_index` of the pair: the least
/// n = ceil(A max(R,1)) + i such that the log-norm increments of Df^n are
/// reverse tempered with constant >= C (and ||Df^n|| >= 2, so the splitting
/// exists) and angle(E^s_0, tangent) >= e^{-eps' i}.  nullopt when the
/// horizon is exhausted.
std::optional<std::size_t> backwards_good_time(const MapTuple& tuple,
                                               const WordFn& word,
                                               const StandardPair& pair,
                                               std::size_t x_index,
                                               const BackwardsGoodParams& params);

}  // namespace rdslab
