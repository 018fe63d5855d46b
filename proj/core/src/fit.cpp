#include "rdslab/fit.hpp"

#include <algorithm>
#include <cmath>

namespace rdslab {

LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    LineFit f;
    f.npoints = xs.size();
    if (xs.size() < 3 || xs.size() != ys.size()) return f;
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) return f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = (syy == 0.0) ? 1.0 : (sxy * sxy) / (sxx * syy);
    f.degenerate = false;
    return f;
}

namespace {
LineFit fit_transformed(const std::vector<double>& xs,
                        const std::vector<double>& ys, double floor,
                        bool log_x) {
    std::vector<double> tx, ty;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
        if (!(ys[i] > floor)) continue;
        if (log_x && !(xs[i] > 0)) continue;
        tx.push_back(log_x ? std::log(xs[i]) : xs[i]);
        ty.push_back(std::log(ys[i]));
    }
    return fit_line(tx, ty);
}
}  // namespace

LineFit fit_log_linear(const std::vector<double>& xs,
                       const std::vector<double>& ys, double floor) {
    return fit_transformed(xs, ys, floor, false);
}

LineFit fit_log_log(const std::vector<double>& xs, const std::vector<double>& ys,
                    double floor) {
    return fit_transformed(xs, ys, floor, true);
}

double fit_log_intercept_fixed_slope(const std::vector<double>& xs,
                                     const std::vector<double>& ys, double rate,
                                     double floor) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
        if (!(ys[i] > floor)) continue;
        s += std::log(ys[i]) - rate * xs[i];
        ++n;
    }
    return n ? s / static_cast<double>(n) : std::nan("");
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nan("");
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace rdslab
