#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rdslab/maps.hpp"
#include "rdslab/torus.hpp"

namespace rdslab {

/// One grid entry of an expanding-on-average scan: the average over words of
/// (1/n0) ln ||Df^{n0}_omega v|| at (point, direction).
struct ExpansionEntry {
    TorusPoint point;
    Direction direction;
    double mean = 0.0;
    double halfwidth = 0.0;  // 0 in exact mode
};

struct ExpansionReport {
    std::size_t n0 = 1;
    double lambda_min = 0.0;
    std::size_t argmin_index = 0;  // into table
    std::vector<ExpansionEntry> table;
    bool exact = true;
    // Monte Carlo confidence (level 1-delta, Hoeffding halfwidth) when not exact.
    std::optional<std::pair<double, double>> confidence;
    // Heuristic Lipschitz modulus of (x, v) -> average, from the tuple's
    // coefficient bounds; lambda_min - lipschitz * mesh is a heuristic global
    // lower bound, not a certificate.
    double lipschitz = 0.0;
    double grid_mesh = 0.0;
    double certified_lower_bound() const {
        return lambda_min - lipschitz * grid_mesh;
    }
};

struct EnumerationCapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Uniform grids used by both modes: G x G points offset to cell centers,
/// D directions over [0, pi).
std::vector<TorusPoint> point_grid(std::size_t G);
std::vector<Direction> direction_grid(std::size_t D);

/// Exact word enumeration over all m^{n0} words.  Throws EnumerationCapError
/// when m^{n0} exceeds `cap` (default 1e6) with a hint to use the Monte Carlo
/// mode.
ExpansionReport eoa_exact(const MapTuple& tuple, std::size_t n0,
                          const std::vector<TorusPoint>& points,
                          const std::vector<Direction>& directions,
                          std::uint64_t cap = 1000000);

/// Monte Carlo scan: per grid entry, M independent words; reported halfwidth
/// is the Hoeffding bound c sqrt(ln(2/delta) / (2 M)) with
/// c = n0 * max per-step log-expansion bound (from the tuple's c1 bound).
ExpansionReport eoa_monte_carlo(const MapTuple& tuple, std::size_t n0,
                                const std::vector<TorusPoint>& points,
                                const std::vector<Direction>& directions,
                                std::size_t M, double delta,
                                std::uint64_t seed, std::uint64_t stream_base = 0);

/// Hoeffding halfwidth c sqrt(ln(2/delta)/(2M)), exposed for tests.
double hoeffding_halfwidth(double c, double delta, std::size_t M);

/// Escalates n0 = 1, 2, ... until the certified lower bound is positive or
/// the cap is reached; returns every per-n0 report.  The verdict is
/// "expanding" only when the heuristic certified bound is positive.
struct EscalationResult {
    std::vector<ExpansionReport> reports;
    bool expanding = false;
    std::size_t verdict_n0 = 0;
};
EscalationResult eoa_escalate(const MapTuple& tuple, std::size_t n0_max,
                              const std::vector<TorusPoint>& points,
                              const std::vector<Direction>& directions,
                              std::uint64_t cap = 1000000);

}  // namespace rdslab
