#include "rdslab/expansion.hpp"

#include <cmath>

#include "rdslab/cocycle.hpp"
#include "rdslab/parallel.hpp"
#include "rdslab/words.hpp"

namespace rdslab {

std::vector<TorusPoint> point_grid(std::size_t G) {
    std::vector<TorusPoint> pts;
    pts.reserve(G * G);
    for (std::size_t i = 0; i < G; ++i)
        for (std::size_t j = 0; j < G; ++j)
            pts.push_back({(static_cast<double>(i) + 0.5) / static_cast<double>(G),
                           (static_cast<double>(j) + 0.5) / static_cast<double>(G)});
    return pts;
}

std::vector<Direction> direction_grid(std::size_t D) {
    std::vector<Direction> dirs;
    dirs.reserve(D);
    for (std::size_t i = 0; i < D; ++i)
        dirs.push_back(Direction{M_PI * static_cast<double>(i) /
                                 static_cast<double>(D)});
    return dirs;
}

namespace {

// Average over all m^{n0} words of ln ||Df^{n0} v|| for every direction at
// once, by DFS over the word tree reusing prefix products.
void enumerate_point(const MapTuple& tuple, std::size_t n0, const TorusPoint& p,
                     const std::vector<Direction>& dirs,
                     std::vector<double>& sums) {
    const std::size_t m = tuple.size();
    struct Frame {
        TorusPoint pt;
        Mat2 prod;
        std::size_t depth;
    };
    std::vector<Frame> stack;
    stack.push_back({p, Mat2::identity(), 0});
    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        if (f.depth == n0) {
            for (std::size_t d = 0; d < dirs.size(); ++d) {
                const auto iv = f.prod.apply(dirs[d].cx(), dirs[d].cy());
                sums[d] += std::log(std::hypot(iv[0], iv[1]));
            }
            continue;
        }
        for (std::size_t s = 0; s < m; ++s) {
            auto [img, df] = tuple[s].evaluate(f.pt);
            stack.push_back({img, df * f.prod, f.depth + 1});
        }
    }
}

double heuristic_lipschitz(const MapTuple& tuple, std::size_t n0) {
    // Crude modulus for (x, v) -> (1/n0) E ln||Df^{n0} v||: each of the n0
    // chain factors moves at Lipschitz rate c2 * c1^{n0} in x, and the
    // direction sensitivity is bounded by the product condition number.
    const double c1 = tuple.c1_bound;
    const double c2 = std::max(tuple.c2_bound, 1.0);
    return c2 * std::pow(c1, static_cast<double>(n0)) *
           static_cast<double>(n0);
}

double grid_mesh(std::size_t npoints, std::size_t ndirs) {
    const double G = std::sqrt(static_cast<double>(npoints));
    const double point_mesh = (G > 0) ? 0.5 * std::sqrt(2.0) / G : 0.0;
    const double dir_mesh =
        ndirs > 0 ? 0.5 * M_PI / static_cast<double>(ndirs) : 0.0;
    return std::max(point_mesh, dir_mesh);
}

void finalize(ExpansionReport& rep) {
    rep.lambda_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rep.table.size(); ++i) {
        if (rep.table[i].mean < rep.lambda_min) {
            rep.lambda_min = rep.table[i].mean;
            rep.argmin_index = i;
        }
    }
}

}  // namespace

double hoeffding_halfwidth(double c, double delta, std::size_t M) {
    return c * std::sqrt(std::log(2.0 / delta) /
                         (2.0 * static_cast<double>(M)));
}

ExpansionReport eoa_exact(const MapTuple& tuple, std::size_t n0,
                          const std::vector<TorusPoint>& points,
                          const std::vector<Direction>& directions,
                          std::uint64_t cap) {
    const double words = std::pow(static_cast<double>(tuple.size()),
                                  static_cast<double>(n0));
    if (words > static_cast<double>(cap))
        throw EnumerationCapError(
            "eoa_exact: m^n0 exceeds the enumeration cap; use eoa_monte_carlo");

    ExpansionReport rep;
    rep.n0 = n0;
    rep.exact = true;
    rep.table.resize(points.size() * directions.size());

    parallel_for(points.size(), [&](std::size_t pi) {
        std::vector<double> sums(directions.size(), 0.0);
        enumerate_point(tuple, n0, points[pi], directions, sums);
        for (std::size_t d = 0; d < directions.size(); ++d) {
            ExpansionEntry& e = rep.table[pi * directions.size() + d];
            e.point = points[pi];
            e.direction = directions[d];
            e.mean = sums[d] / (words * static_cast<double>(n0));
            e.halfwidth = 0.0;
        }
    });
    finalize(rep);
    rep.lipschitz = heuristic_lipschitz(tuple, n0);
    rep.grid_mesh = grid_mesh(points.size(), directions.size());
    return rep;
}

ExpansionReport eoa_monte_carlo(const MapTuple& tuple, std::size_t n0,
                                const std::vector<TorusPoint>& points,
                                const std::vector<Direction>& directions,
                                std::size_t M, double delta, std::uint64_t seed,
                                std::uint64_t stream_base) {
    if (M == 0) throw std::invalid_argument("eoa_monte_carlo: M must be >= 1");
    ExpansionReport rep;
    rep.n0 = n0;
    rep.exact = false;
    rep.table.resize(points.size() * directions.size());

    const double per_step = std::log(std::max(tuple.c1_bound, 1.0 + 1e-15));
    const double c = static_cast<double>(n0) * per_step;
    const double hw = hoeffding_halfwidth(c, delta, M);
    rep.confidence = {1.0 - delta, hw};

    parallel_for(points.size(), [&](std::size_t pi) {
        for (std::size_t d = 0; d < directions.size(); ++d) {
            double sum = 0.0;
            for (std::size_t w = 0; w < M; ++w) {
                WordStream ws(seed,
                              stream_base + pi * directions.size() * M +
                                  d * M + w,
                              static_cast<unsigned>(tuple.size()));
                TorusPoint cur = points[pi];
                double vx = directions[d].cx(), vy = directions[d].cy();
                double lognorm = 0.0;
                for (std::size_t i = 0; i < n0; ++i) {
                    auto [img, df] = tuple[ws.symbol(i)].evaluate(cur);
                    cur = img;
                    const auto iv = df.apply(vx, vy);
                    const double nrm = std::hypot(iv[0], iv[1]);
                    vx = iv[0] / nrm;
                    vy = iv[1] / nrm;
                    lognorm += std::log(nrm);
                }
                sum += lognorm / static_cast<double>(n0);
            }
            ExpansionEntry& e = rep.table[pi * directions.size() + d];
            e.point = points[pi];
            e.direction = directions[d];
            e.mean = sum / static_cast<double>(M);
            e.halfwidth = hw;
        }
    });
    finalize(rep);
    rep.lipschitz = heuristic_lipschitz(tuple, n0);
    rep.grid_mesh = grid_mesh(points.size(), directions.size());
    return rep;
}

EscalationResult eoa_escalate(const MapTuple& tuple, std::size_t n0_max,
                              const std::vector<TorusPoint>& points,
                              const std::vector<Direction>& directions,
                              std::uint64_t cap) {
    EscalationResult res;
    for (std::size_t n0 = 1; n0 <= n0_max; ++n0) {
        ExpansionReport rep = eoa_exact(tuple, n0, points, directions, cap);
        const bool certified = rep.certified_lower_bound() > 0.0;
        const bool positive = rep.lambda_min > 0.0;
        res.reports.push_back(std::move(rep));
        if (positive && certified) {
            res.expanding = true;
            res.verdict_n0 = n0;
            break;
        }
    }
    if (!res.expanding && !res.reports.empty())
        res.verdict_n0 = res.reports.back().n0;
    return res;
}

}  // namespace rdslab
