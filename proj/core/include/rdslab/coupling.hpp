#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "rdslab/fake_leaf.hpp"
#include "rdslab/pairs.hpp"

namespace rdslab {

/// Parameters of a well-positioned configuration attempt.  The cone
/// candidates (center, halfwidth) are scanned in order and the first one
/// theta0-transverse to both curves wins; calibrate them from the measured
/// stable-direction distribution so they carry positive nu-mass.
struct ConfigurationParams {
    double C = 2.5;          // regularity bound for both pairs
    double delta = 0.015;    // required margin from the curve endpoints
    double upsilon = 0.003;  // required witness proximity (<= tau * delta)
    double tau = 0.25;
    double theta0 = 0.25;    // transversality margin
    std::vector<std::pair<double, double>> cones = {
        {M_PI / 6.0, 0.30}, {M_PI / 2.0, 0.30}, {5.0 * M_PI / 6.0, 0.30}};
};

/// Cone candidates from the sampled stable-direction distribution at x:
/// the full support band first (widest), then its thirds, each bracketed by
/// sample quantiles.  Bands are unwrapped across the pi seam by rotating the
/// largest sample gap there.
std::vector<std::pair<double, double>> calibrate_cones(const MapTuple& tuple,
                                                       const TorusPoint& x,
                                                       std::size_t n,
                                                       std::size_t W,
                                                       std::uint64_t seed);

/// Witnesses of a detected configuration plus the chosen transverse cone.
struct Configuration {
    double arc1 = 0.0;
    double arc2 = 0.0;
    TorusPoint x, y;
    int cone_index = 0;
    double cone_center = 0.0;
    double cone_halfwidth = 0.0;
};

enum class ConfigFailure { proximity, regularity, margin, transversality };

/// Searches witness pairs (x, y) with d(x, y) < upsilon, both delta-interior
/// and C-regular; picks among three fixed cones the one theta0-transverse to
/// both curves near the witnesses.
std::variant<Configuration, ConfigFailure> detect_configuration(
    const StandardPair& p1, const StandardPair& p2,
    const ConfigurationParams& params);

/// Tunables of the local coupling loop; defaults calibrated on
/// cat_pair_shear(0.1) and frozen.
struct CouplingParams {
    // strict temperedness (the kept points) and the relaxed level used for
    // padded neighborhoods
    double C = 2.5;
    double lambda = 0.45;
    double eps = 0.04;
    double relax_offset = 2.0;  // C' = C + relax_offset
    double lambda_prime = 0.30;
    double sigma = 0.15;        // padding exponent delta_n = eta_n^{1+sigma}
    // density recursion: rho_n = rho_{n-1} (1 - e^{-n eta_hat}); eta_hat
    // honors eta_hat < min(eta/2, 1.99 lambda' (1-sigma)^2 alpha / 2) with
    // the calibrated holonomy-Jacobian decay eta = 0.35 and alpha = 1/2
    double eta_hat = 0.10;
    double a0 = 0.25;           // initial mass floor fraction
    double K1 = 0.05;           // edge trim constant (width K1 e^{-4 Lmax n})
    std::size_t N0 = 6;         // first fake-coupling time
    std::size_t horizon = 22;   // local-coupling declaration time
    double theta0 = 0.25;       // transversality threshold for cone choice
    double cone_halfwidth = 0.30;
    LeafParams leaf{};
    // recovery
    std::size_t block_delta = 3;   // Delta
    std::size_t block_q = 1;       // q (block length (q+1) Delta)
    double recover_C0 = 4.0;       // target goodness of recovered blocks
    BackwardsGoodParams recover{};
    std::size_t recovery_max_blocks = 12;
    // run loop
    double residual_target = 1e-4;
    std::size_t max_periods = 10;
};

/// Per-step ledger row; conservation holds exactly by construction
/// (entries telescope off one mass sequence).
struct CouplingStepLedger {
    std::size_t n = 0;
    double coupled = 0.0;
    double stopped = 0.0;
    double residual = 0.0;
};

struct CoupledSample {
    TorusPoint x;
    TorusPoint ux;  // Upsilon(x)
    std::size_t T = 0;
};

struct MatchedBlock {
    double source_lo = 0.0, source_hi = 0.0;
    double target_lo = 0.0, target_hi = 0.0;
    double mass = 0.0;
    std::size_t stop_time = 0;
};

struct CouplingRecord {
    double initial_mass = 0.0;
    std::vector<CouplingStepLedger> steps;
    double coupled_mass = 0.0;
    double stopped_mass = 0.0;  // equal on both sides by construction
    double residual_mass = 0.0;
    std::vector<CoupledSample> samples;
    std::vector<MatchedBlock> blocks;
    double a0_effective = 0.0;
    double floor_b0 = 0.0;  // b0 of the density floor actually maintained

    bool conservation_ok(double tol = 1e-10) const;
    bool residual_monotone() const;
};

/// One stopped piece: a sub-pair of the original curve (geometry at its
/// birth time) carrying an exact weight.
struct MassPiece {
    StandardPair pair;
    double weight = 1.0;  // mass multiplier (bin weight, exact arithmetic)
    std::size_t birth_time = 0;

    double mass() const { return weight * pair.mass; }
};

struct LocalCoupleResult {
    CouplingRecord record;
    std::vector<MassPiece> residual1;
    std::vector<MassPiece> residual2;
    // diagnostics: strict tempered nodes kept through every step
    bool strict_points_kept = true;
};

/// Local coupling of two configured pairs of equal mass along fake stable
/// holonomies with the discounted density recursion.
LocalCoupleResult local_couple(const MapTuple& tuple, const StandardPair& p1,
                               const StandardPair& p2, const WordFn& word,
                               const Configuration& config,
                               const CouplingParams& params);

/// Coupled recovery: pushes both families block by block, stops matched
/// recovered blocks of equal mass whose images are C0-good, and returns the
/// matched blocks plus the families carried forward.
struct RecoveryResult {
    struct BlockPair {
        MassPiece side1;
        MassPiece side2;
        std::size_t stop_time = 0;
    };
    std::vector<BlockPair> matched;
    std::vector<MassPiece> carried1;
    std::vector<MassPiece> carried2;
    std::vector<CouplingStepLedger> tail;  // residual after each block
};
RecoveryResult coupled_recovery(const MapTuple& tuple,
                                std::vector<MassPiece> f1,
                                std::vector<MassPiece> f2, const WordFn& word,
                                const CouplingParams& params);

/// Full coupling loop: alternates local coupling, coupled recovery and the
/// greedy nearest-witness precoupling pairing until the residual drops below
/// the target or the period budget is exhausted.  Emits the P(T-hat > n)
/// curve and coupled sample pairs.
struct RunResult {
    CouplingRecord record;
    std::vector<double> tail_n;
    std::vector<double> tail_prob;  // P(T-hat > n)
    bool horizon_exhausted = false;
    double per_attempt_coupled_fraction = 0.0;  // measured p (aggregate)
    std::size_t periods = 0;
    // per-period progress: residual fraction after each period and the
    // fraction of the period-start residual that coupled during it
    std::vector<double> period_residual;
    std::vector<double> period_coupled_fraction;
};
RunResult run_coupling(const StandardPair& p1, const StandardPair& p2,
                       const MapTuple& tuple, std::uint64_t seed,
                       std::uint64_t stream, const CouplingParams& params);

}  // namespace rdslab
