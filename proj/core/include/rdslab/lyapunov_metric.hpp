#pragma once

#include <stdexcept>
#include <vector>

#include "rdslab/mat2.hpp"

namespace rdslab {

/// Finite-time Lyapunov metric along a cocycle with a declared splitting.
/// The per-step quadratic forms are encoded by the rescaled lengths of the
/// transported stable/unstable frame vectors (the frame is declared
/// orthogonal for the primed metric):
///
///   ||xi^s||'_i = ( sum_{l=0}^{n-i} ||A_i^l xi^s||^2 e^{2 lambda' l} )^{1/2}
///   ||xi^u||'_i = ( sum_{l=0}^{i}   e^{2 lambda' l} ||[A_{i-l}^l]^{-1} xi^u||^2 )^{1/2}
///
/// Per-step contraction/expansion and the comparison with the reference
/// metric are evaluated exactly on the finite horizon and attached.
struct LyapMetricSeq {
    double lambda_prime = 0.0;
    // frame at step i: unit stable/unstable directions (transported E^s, E^u)
    std::vector<double> es_x, es_y, eu_x, eu_y;
    // primed lengths of the transported unit frame vectors
    std::vector<double> stable_norm;    // ||e_s||'_i
    std::vector<double> unstable_norm;  // ||e_u||'_i
    // ratio ||A_i e||'_{i+1} / ||e||'_i per step, for the contract checks
    std::vector<double> stable_step_ratio;    // must be <= e^{-lambda'}
    std::vector<double> unstable_step_ratio;  // must be >= e^{+lambda'}
    // comparison data: max over the sampled unit circle of ||xi||'_i / ||xi||_i
    std::vector<double> comparison_upper;
    std::vector<double> comparison_lower;

    bool per_step_ok(double tol = 1e-9) const;
};

struct LyapMetricError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Splitting input: unit stable/unstable directions at time 0 (typically the
/// singular split of A^n).  Throws LyapMetricError when lambda' > lambda.
LyapMetricSeq lyapunov_metric(const std::vector<Mat2>& mats, double es_x,
                              double es_y, double eu_x, double eu_y,
                              double lambda, double lambda_prime);

/// Comparison bound of the metric lemma, item (3):
///   (1/sqrt2) ||xi|| <= ||xi||'_i <= 4 e^{2C + 2 eps i} (1 - e^{2(l'-l)})^{-1/2} ||xi||.
double lyapunov_comparison_bound(double C, double eps, std::size_t i,
                                 double lambda, double lambda_prime);

}  // namespace rdslab
