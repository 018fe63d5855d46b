#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rdslab/fit.hpp"
#include "rdslab/maps.hpp"
#include "rdslab/pairs.hpp"
#include "rdslab/words.hpp"

namespace rdslab {

/// Trigonometric observable sum_k a_k cos(2 pi (p_k x + q_k y) + phase_k)
/// with closed-form integral and coefficient norm bounds.
struct Observable {
    struct Mode {
        int p = 0;
        int q = 0;
        double amplitude = 1.0;
        double phase = 0.0;
    };
    std::vector<Mode> modes;

    double eval(const TorusPoint& pt) const;
    double exact_integral() const;  // nonzero only through (0,0) modes
    double sup_norm() const;        // l1 of amplitudes
    double holder_norm() const;     // 2 pi l1 of |k| amplitudes
    int max_freq() const;

    static Observable cosine(int p, int q, double amplitude = 1.0,
                             double phase = 0.0) {
        Observable o;
        o.modes.push_back({p, q, amplitude, phase});
        return o;
    }
};

struct AliasingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Quenched correlation series on the N x N lattice:
///   C_n = (1/N^2) sum_p phi(p) psi(f^n_omega p) - phi_bar psi_bar.
/// Requires N >= 2 max mode frequency so the lattice means are exact.
std::vector<double> correlation_quenched(const MapTuple& tuple,
                                         const WordFn& word,
                                         const Observable& phi,
                                         const Observable& psi,
                                         std::size_t nmax, std::size_t N);

/// Monte Carlo quadrature alternative with a CLT halfwidth per n.
struct McSeries {
    std::vector<double> c;
    std::vector<double> halfwidth;  // 1.96 sd / sqrt(M)
};
McSeries correlation_quenched_mc(const MapTuple& tuple, const WordFn& word,
                                 const Observable& phi, const Observable& psi,
                                 std::size_t nmax, std::size_t M,
                                 std::uint64_t seed, std::uint64_t stream);

/// Annealed series: the average of per-word quenched series over W streams,
/// accumulated in fixed stream order (bit-for-bit the mean of `quenched`).
struct AnnealedResult {
    std::vector<std::vector<double>> quenched;  // per stream
    std::vector<double> annealed;
};
AnnealedResult correlation_annealed(const MapTuple& tuple, std::uint64_t seed,
                                    std::uint64_t stream_base, std::size_t W,
                                    const Observable& phi, const Observable& psi,
                                    std::size_t nmax, std::size_t N);

/// Exponential-rate fit of a correlation series: least squares on
/// (n, ln |C_n|) above the floor, restricted to the decaying head of the
/// series (the window ends where |C_n| attains its minimum, cutting off the
/// quadrature-noise plateau).
struct MixingFit {
    double eta_hat = 0.0;   // decay rate (positive when decaying)
    double C_hat = 0.0;     // prefactor
    double r2 = 0.0;
    bool degenerate = true;  // fewer than 3 usable points
    std::size_t npoints = 0;
    std::pair<std::size_t, std::size_t> window = {0, 0};  // n-range used
};
MixingFit rate_fit(const std::vector<double>& series, double floor = 1e-12);

/// Per-word prefactor tail: fit each word's series with the slope pinned at
/// the ensemble median eta-hat, then report the survival curve of C-hat on a
/// log grid together with its log-log slope.
struct CwTail {
    double eta_median = 0.0;
    std::vector<double> per_word_C;
    std::vector<double> C_grid;
    std::vector<double> survival;
    LineFit loglog;
};
CwTail c_omega_tail(const MapTuple& tuple, const Observable& phi,
                    const Observable& psi, std::size_t nmax, std::size_t W,
                    std::uint64_t seed, std::uint64_t stream_base,
                    std::size_t N, double floor = 1e-12);

/// | integral of phi against the pushed unit-mass pair  -  integral of phi |.
double equidistribution_error(const MapTuple& tuple, const WordFn& word,
                              const StandardPair& pair, const Observable& phi,
                              std::size_t n);

}  // namespace rdslab
