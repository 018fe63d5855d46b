#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rdslab/maps.hpp"
#include "rdslab/mat2.hpp"
#include "rdslab/torus.hpp"
#include "rdslab/words.hpp"

namespace rdslab {

/// A 2x2 product kept numerically sane: `mat * exp(logscale)` is the true
/// matrix.  The running product is rescaled by its max-abs entry whenever
/// that entry exceeds 1e3, so directions stay exact (scalar rescale only)
/// and the determinant of the stored matrix keeps enough precision for the
/// det/logscale consistency checks; the magnitude lives in the log.
struct ScaledMat {
    Mat2 mat;
    double logscale = 0.0;

    double lognorm() const { return std::log(mat.norm()) + logscale; }
    double logconorm() const { return std::log(mat.conorm()) + logscale; }

    void absorb(const Mat2& factor) {
        mat = factor * mat;
        const double big = mat.max_abs();
        if (big > 1e3) {
            mat = (1.0 / big) * mat;
            logscale += std::log(big);
        }
    }
};

/// Orbit of a point under a word plus the renormalized running cocycle
/// products Df^n and their log-norms.  products[i] represents A^i = A_i...A_1
/// (paper order), with products[0] = identity.
struct CocycleTrace {
    std::vector<TorusPoint> points;     // length n+1
    std::vector<unsigned> symbols;      // length n (0-based symbols)
    std::vector<Mat2> factors;          // factors[i] = Df_{symbols[i]} at points[i]
    std::vector<ScaledMat> products;    // length n+1
    std::vector<double> lognorms;       // lognorms[i] = ln ||A^i||, lognorms[0] = 0

    std::size_t length() const { return symbols.size(); }

    /// Sub-product A^k_i = A_{i+k} ... A_{i+1} (renormalized).
    ScaledMat subproduct(std::size_t i, std::size_t k) const;

    /// Per-step log-norm increments x_i = ln||A^i|| - ln||A^{i-1}||, i = 1..n;
    /// the scalar sequence all temperedness calculus runs on.
    std::vector<double> lognorm_increments() const;
};

struct SymbolRangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// f^n_omega = f_{omega_n} ... f_{omega_1} applied to p, with the full trace.
/// `word(i)` supplies the 0-based symbol applied at step i+1.
CocycleTrace compose_word(const MapTuple& tuple,
                          const std::function<unsigned(std::uint64_t)>& word,
                          std::size_t n, const TorusPoint& p);

inline CocycleTrace compose_word(const MapTuple& tuple, const WordStream& ws,
                                 std::size_t n, const TorusPoint& p) {
    return compose_word(
        tuple, [&ws](std::uint64_t i) { return ws.symbol(i); }, n, p);
}

/// Singular split of a product: perpendicular contracted/expanded directions
/// plus log sigma_1.  When ||A|| = 1 within 1e-12 there is no distinguished
/// direction; the designated default theta_s = pi/2 is returned with the
/// degenerate flag set.
struct SplitEstimate {
    Direction theta_s;
    Direction theta_u;
    double log_sigma1 = 0.0;
    bool degenerate = false;
};

SplitEstimate singular_split(const ScaledMat& product);

}  // namespace rdslab
