#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rdslab/cocycle.hpp"
#include "rdslab/fit.hpp"
#include "rdslab/maps.hpp"

namespace rdslab {

struct TemperedParams {
    double C = 0.0;
    double lambda = 0.0;  // > 0
    double eps = 0.0;     // >= 0
};

/// Extremal temperedness constant of a scalar sequence:
///
///   C* = min over 0 <= j < k <= n of  sum_{i=j+1}^{k} x_i - lambda (k-j) + j eps,
///
/// so (x_i) is (C, lambda, eps)-tempered iff C <= C*.  `reverse` applies the
/// definition to the reversed sequence.
///
/// The value is computed by an O(n) prefix scan over
///   a_k = S_k - lambda*k,   b_j = (eps*j + lambda*j) - S_j,   term = a_k + b_j,
/// with S the prefix sums; any reference evaluation that wants bitwise
/// agreement must use the identical arrangement.  Ties at the minimum resolve
/// to the lexicographically smallest (j, k).
struct TemperedScan {
    double c_star = 0.0;
    std::size_t argmin_j = 0;
    std::size_t argmin_k = 0;
};
TemperedScan tempered_constant_scan(const std::vector<double>& xs, double lambda,
                                    double eps, bool reverse = false);
double tempered_constant(const std::vector<double>& xs, double lambda,
                         double eps, bool reverse = false);

/// Extremal constant for subtempered norms of a matrix sequence:
///   C* = min over i >= 1, j >= 0, i+j <= n of
///        ln||A^{i+j}|| - ln||A^j|| - lambda i + eps j.
double subtempered_norm_constant(const std::vector<Mat2>& mats, double lambda,
                                 double eps);
double subtempered_norm_constant_lognorms(const std::vector<double>& lognorms,
                                          double lambda, double eps);

/// Cushion of a (C0, lambda, eps)-tempered trajectory of length n:
///   U = min over 0 <= k < n of ln||A^n|| - ln||A^k|| - C0 - (n-k) lambda + eps k,
/// with ln||A^0|| = 0.
double cushion(const std::vector<Mat2>& mats, double C0, double lambda,
               double eps);
double cushion_lognorms(const std::vector<double>& lognorms, double C0,
                        double lambda, double eps);

/// Certificate that s = s_n, u = u_n define a tempered splitting: all three
/// inequalities of the splitting definition evaluated at every admissible
/// (k, m):
///   (1)  ||A^m_k (A^k u)|| / ||A^k u||  >=  e^{-C} e^{lambda m} e^{-eps k}
///   (2)  ||A^m_k (A^k s)|| / ||A^k s||  <=  e^{C}  e^{-lambda m} e^{eps k}
///   (3)  angle(A^k s, A^k u)            >=  e^{-C} e^{-eps k}
/// best_C_split is the least C for which all three hold; pass means
/// best_C_split <= params.C.  The angle table holds consecutive
/// angle(s_m, s_{m+1}) for m >= N0(C) = ceil((C + ln 2)/lambda) together with
/// a log-linear decay fit.
struct SplittingCertificate {
    TemperedParams params;
    double best_C_split = 0.0;
    bool pass = false;
    // first (k+m, inequality #) violated with the stated constants
    std::optional<std::pair<std::size_t, int>> first_violation;
    std::vector<std::size_t> angle_m;
    std::vector<double> angle_gap;  // angle(s_m, s_{m+1})
    LineFit angle_decay;            // fit of ln angle_gap against m
    bool degenerate = false;        // ||A^n|| = 1 tie-break used
};
SplittingCertificate splitting_certificate(const std::vector<Mat2>& mats,
                                           double C, double lambda, double eps);

/// First n such that the prefix x_1..x_n is not (C, lambda, eps)-tempered;
/// nullopt if the whole sequence stays tempered.
std::optional<std::size_t> first_failure_time(const std::vector<double>& xs,
                                              double C, double lambda,
                                              double eps);

/// First T >= max(N,1) such that x_1..x_T is (C0, lambda, eps)-reverse
/// tempered; nullopt if none within the sequence.
std::optional<std::size_t> reverse_return_time(const std::vector<double>& xs,
                                               std::size_t N, double C0,
                                               double lambda, double eps);

/// Azuma-Hoeffding tail bound min(1, 2 exp(-lam^2 / (2 sum c_i^2))).
double azuma_bound(const std::vector<double>& c, double lam);

/// Histogram of stable directions theta_s(Df^n_omega(x)) over sampled words,
/// with the mass profile h(eps) = max_v nu(B_eps(v)) on the dyadic grid
/// eps = 2^-3..2^-10 and its log-log fit (alpha-hat).
struct DirectionHistogram {
    std::size_t bins = 256;
    std::vector<std::size_t> counts;
    std::size_t total = 0;
    std::vector<double> samples;  // angles in [0, pi)
    std::vector<double> mass_eps;
    std::vector<double> mass_h;
    LineFit alpha_fit;  // slope = alpha-hat
    std::size_t n_used = 0;
    std::size_t degenerate_count = 0;

    double bin_width() const;
    /// Total-variation distance between two histograms of equal bin count.
    static double tv_distance(const DirectionHistogram& a,
                              const DirectionHistogram& b);
};

DirectionHistogram stable_direction_distribution(const MapTuple& tuple,
                                                 const TorusPoint& x,
                                                 std::size_t n, std::size_t W,
                                                 std::uint64_t seed,
                                                 std::uint64_t stream_base = 0,
                                                 std::size_t bins = 256);

/// Mass profile h(eps) on an explicit sample set (exposed for tests).
std::vector<double> direction_mass_profile(std::vector<double> samples,
                                           const std::vector<double>& eps_grid);

}  // namespace rdslab
