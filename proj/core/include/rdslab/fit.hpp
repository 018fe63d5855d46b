#pragma once

#include <cstddef>
#include <vector>

namespace rdslab {

/// Ordinary least squares y = slope * x + intercept with R^2.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t npoints = 0;
    bool degenerate = true;  // fewer than 3 points
};

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys);

/// Least squares on (x, ln y), discarding y below `floor`.
LineFit fit_log_linear(const std::vector<double>& xs,
                       const std::vector<double>& ys, double floor = 1e-12);

/// Least squares on (ln x, ln y), same floor convention.
LineFit fit_log_log(const std::vector<double>& xs,
                    const std::vector<double>& ys, double floor = 1e-12);

/// Intercept-only fit of (x, ln y) with the slope pinned: returns the
/// least-squares intercept of ln y + rate * x.
double fit_log_intercept_fixed_slope(const std::vector<double>& xs,
                                     const std::vector<double>& ys, double rate,
                                     double floor = 1e-12);

/// Basic sample statistics.
double mean_of(const std::vector<double>& v);
double stddev_of(const std::vector<double>& v);
double median_of(std::vector<double> v);

}  // namespace rdslab
