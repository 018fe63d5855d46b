#include "rdslab/pairs.hpp"

#include <algorithm>
#include <cmath>

#include "rdslab/tempered.hpp"

namespace rdslab {

StandardPair StandardPair::make(std::vector<TorusPoint> nodes,
                                std::vector<double> logrho, double mesh_target) {
    if (nodes.size() < 2 || nodes.size() != logrho.size())
        throw std::invalid_argument("StandardPair: need >= 2 matched nodes");
    StandardPair p;
    p.nodes = std::move(nodes);
    p.logrho = std::move(logrho);
    p.mesh_target = mesh_target;
    p.refresh_arcs_and_mass();
    return p;
}

StandardPair StandardPair::segment(const TorusPoint& a, const TorusPoint& b,
                                   double mesh_target, std::size_t min_nodes) {
    const double dx = wrap_half(b.x - a.x);
    const double dy = wrap_half(b.y - a.y);
    const double len = std::hypot(dx, dy);
    const std::size_t count = std::max<std::size_t>(
        min_nodes,
        static_cast<std::size_t>(std::ceil(len / mesh_target)) + 1);
    std::vector<TorusPoint> nodes(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        nodes[i] = TorusPoint::reduced(a.x + t * dx, a.y + t * dy);
    }
    return make(std::move(nodes), std::vector<double>(count, 0.0), mesh_target);
}

StandardPair StandardPair::ray(const TorusPoint& a, double angle, double length,
                               double mesh_target) {
    const std::size_t count = std::max<std::size_t>(
        9, static_cast<std::size_t>(std::ceil(length / mesh_target)) + 1);
    std::vector<TorusPoint> nodes(count);
    const double ux = std::cos(angle), uy = std::sin(angle);
    for (std::size_t i = 0; i < count; ++i) {
        const double s =
            length * static_cast<double>(i) / static_cast<double>(count - 1);
        nodes[i] = TorusPoint::reduced(a.x + s * ux, a.y + s * uy);
    }
    return make(std::move(nodes), std::vector<double>(count, 0.0), mesh_target);
}

double StandardPair::trapezoid_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double seg = arcs[i + 1] - arcs[i];
        m += 0.5 * (std::exp(logrho[i]) + std::exp(logrho[i + 1])) * seg;
    }
    return m;
}

void StandardPair::refresh_arcs_and_mass() {
    arcs.resize(nodes.size());
    arcs[0] = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double dx = wrap_half(nodes[i + 1].x - nodes[i].x);
        const double dy = wrap_half(nodes[i + 1].y - nodes[i].y);
        arcs[i + 1] = arcs[i] + std::hypot(dx, dy);
    }
    mass = trapezoid_mass();
}

std::pair<double, double> StandardPair::tangent_at(std::size_t i) const {
    const std::size_t lo = (i == 0) ? 0 : i - 1;
    const std::size_t hi = (i + 1 < nodes.size()) ? i + 1 : i;
    const double dx = wrap_half(nodes[hi].x - nodes[lo].x);
    const double dy = wrap_half(nodes[hi].y - nodes[lo].y);
    const double nrm = std::hypot(dx, dy);
    return {dx / nrm, dy / nrm};
}

std::size_t StandardPair::node_at_arc(double s) const {
    const auto it = std::lower_bound(arcs.begin(), arcs.end(), s);
    if (it == arcs.end()) return nodes.size() - 1;
    const std::size_t i = static_cast<std::size_t>(it - arcs.begin());
    if (i == 0) return 0;
    return (s - arcs[i - 1] < arcs[i] - s) ? i - 1 : i;
}

TorusPoint StandardPair::point_at_arc(double s) const {
    if (s <= 0.0) return nodes.front();
    if (s >= length()) return nodes.back();
    const auto it = std::upper_bound(arcs.begin(), arcs.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arcs.begin()) - 1;
    const double seg = arcs[i + 1] - arcs[i];
    const double t = seg > 0 ? (s - arcs[i]) / seg : 0.0;
    const double dx = wrap_half(nodes[i + 1].x - nodes[i].x);
    const double dy = wrap_half(nodes[i + 1].y - nodes[i].y);
    return TorusPoint::reduced(nodes[i].x + t * dx, nodes[i].y + t * dy);
}

double StandardPair::logrho_at_arc(double s) const {
    if (s <= 0.0) return logrho.front();
    if (s >= length()) return logrho.back();
    const auto it = std::upper_bound(arcs.begin(), arcs.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - arcs.begin()) - 1;
    const double seg = arcs[i + 1] - arcs[i];
    const double t = seg > 0 ? (s - arcs[i]) / seg : 0.0;
    return logrho[i] + t * (logrho[i + 1] - logrho[i]);
}

Goodness goodness(const StandardPair& pair, double alpha) {
    if (pair.nodes.size() < 3)
        throw std::invalid_argument("goodness: need >= 3 nodes for curvature");
    Goodness g;
    g.alpha = alpha;
    g.len = pair.length();

    // Curvature via the three-point circumradius.
    double max_curv = 0.0;
    for (std::size_t i = 1; i + 1 < pair.nodes.size(); ++i) {
        const double abx = wrap_half(pair.nodes[i].x - pair.nodes[i - 1].x);
        const double aby = wrap_half(pair.nodes[i].y - pair.nodes[i - 1].y);
        const double bcx = wrap_half(pair.nodes[i + 1].x - pair.nodes[i].x);
        const double bcy = wrap_half(pair.nodes[i + 1].y - pair.nodes[i].y);
        const double acx = abx + bcx, acy = aby + bcy;
        const double area2 = std::fabs(abx * bcy - aby * bcx);  // 2 * area
        const double lab = std::hypot(abx, aby), lbc = std::hypot(bcx, bcy),
                     lac = std::hypot(acx, acy);
        if (lab * lbc * lac > 0.0)
            max_curv = std::max(max_curv, 2.0 * area2 / (lab * lbc * lac));
    }
    g.c2 = max_curv;

    // Hoelder constant of ln rho over node pairs within arc distance 1.
    double hold = 0.0;
    for (std::size_t i = 0; i < pair.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < pair.nodes.size(); ++j) {
            const double d = pair.arcs[j] - pair.arcs[i];
            if (d > 1.0) break;
            if (d <= 0.0) continue;
            hold = std::max(hold, std::fabs(pair.logrho[j] - pair.logrho[i]) /
                                      std::pow(d, alpha));
        }
    }
    g.holder = hold;

    const double r_len = std::max(0.0, std::log(1.0 / g.len));
    const double r_curv = g.c2 > 1.0 ? std::log(g.c2) : 0.0;
    const double r_dens = g.holder > 1.0 ? std::log(g.holder) : 0.0;
    g.R = std::max({r_len, r_curv, r_dens});
    if (g.R == r_len)
        g.binding = Goodness::Binding::length;
    if (g.R == r_curv && r_curv >= r_len)
        g.binding = Goodness::Binding::curvature;
    if (g.R == r_dens && r_dens >= std::max(r_len, r_curv))
        g.binding = Goodness::Binding::density_holder;
    return g;
}

double StandardFamily::total_mass() const {
    double m = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) m += weights[i] * pairs[i].mass;
    return m;
}

void StandardFamily::add(StandardPair pair, double weight) {
    pairs.push_back(std::move(pair));
    weights.push_back(weight);
}

namespace {

struct TransportNode {
    TorusPoint src;
    TorusPoint img;
    double logrho;
};

// One map application to a polyline with adaptive midpoint refinement when
// image nodes separate beyond 4x mesh (single pass, per-segment recursion).
void push_one_step(const MapSpec& map, std::vector<TransportNode>& line,
                   double mesh) {
    std::vector<TransportNode> out;
    out.reserve(line.size() * 2);
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        out.push_back(line[i]);
        // subdivide the source segment until image gaps close up
        struct Seg {
            TransportNode a, b;
            int depth;
        };
        std::vector<Seg> work{{line[i], line[i + 1], 0}};
        std::vector<TransportNode> inserted;
        while (!work.empty()) {
            Seg sg = work.back();
            work.pop_back();
            const double gap = torus_dist(map.apply(sg.a.src), map.apply(sg.b.src));
            const double src_gap = torus_dist(sg.a.src, sg.b.src);
            if (gap > 4.0 * mesh && src_gap > 1e-13 && sg.depth < 24) {
                TransportNode mid;
                mid.src = TorusPoint::reduced(
                    sg.a.src.x + 0.5 * wrap_half(sg.b.src.x - sg.a.src.x),
                    sg.a.src.y + 0.5 * wrap_half(sg.b.src.y - sg.a.src.y));
                mid.logrho = 0.5 * (sg.a.logrho + sg.b.logrho);
                work.push_back({mid, sg.b, sg.depth + 1});
                work.push_back({sg.a, mid, sg.depth + 1});
            } else if (!(sg.b.src.x == line[i + 1].src.x &&
                         sg.b.src.y == line[i + 1].src.y)) {
                inserted.push_back(sg.b);
            }
        }
        for (const TransportNode& tn : inserted) out.push_back(tn);
    }
    out.push_back(line.back());
    line = std::move(out);
    // transport: image points and the log arc-length Jacobian per node
    std::vector<double> stretch(line.size(), 1.0);
    std::vector<TorusPoint> images(line.size());
    for (std::size_t i = 0; i < line.size(); ++i) images[i] = map.apply(line[i].src);
    for (std::size_t i = 0; i < line.size(); ++i) {
        const std::size_t lo = (i == 0) ? 0 : i - 1;
        const std::size_t hi = (i + 1 < line.size()) ? i + 1 : i;
        const double sdx = wrap_half(line[hi].src.x - line[lo].src.x);
        const double sdy = wrap_half(line[hi].src.y - line[lo].src.y);
        const double idx = wrap_half(images[hi].x - images[lo].x);
        const double idy = wrap_half(images[hi].y - images[lo].y);
        const double snorm = std::hypot(sdx, sdy);
        if (snorm > 0) stretch[i] = std::hypot(idx, idy) / snorm;
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
        line[i].img = images[i];
        line[i].logrho -= std::log(std::max(stretch[i], 1e-300));
        line[i].src = images[i];
    }
}

// split indexes where the polyline turns by more than pi/2 per node step
std::vector<std::size_t> fold_points(const std::vector<TransportNode>& line) {
    std::vector<std::size_t> cuts;
    for (std::size_t i = 1; i + 1 < line.size(); ++i) {
        const double ax = wrap_half(line[i].src.x - line[i - 1].src.x);
        const double ay = wrap_half(line[i].src.y - line[i - 1].src.y);
        const double bx = wrap_half(line[i + 1].src.x - line[i].src.x);
        const double by = wrap_half(line[i + 1].src.y - line[i].src.y);
        const double dot = ax * bx + ay * by;
        const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
        if (na > 0 && nb > 0 && dot / (na * nb) < 0.0) cuts.push_back(i);
    }
    return cuts;
}

StandardPair resample(const StandardPair& pair) {
    const double len = pair.length();
    const std::size_t count = std::max<std::size_t>(
        3, static_cast<std::size_t>(std::ceil(len / pair.mesh_target)) + 1);
    std::vector<TorusPoint> nodes(count);
    std::vector<double> logrho(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double s = len * static_cast<double>(i) / static_cast<double>(count - 1);
        nodes[i] = pair.point_at_arc(s);
        logrho[i] = pair.logrho_at_arc(s);
    }
    StandardPair out = StandardPair::make(std::move(nodes), std::move(logrho),
                                          pair.mesh_target);
    // quadrature closure: restore the exact mass
    if (out.mass > 0 && pair.mass > 0) {
        const double corr = std::log(pair.mass / out.mass);
        for (double& lr : out.logrho) lr += corr;
        out.mass = pair.mass;
    }
    return out;
}

}  // namespace

StandardFamily push_pair(const MapTuple& tuple, const WordFn& word,
                         std::size_t n, const StandardPair& pair) {
    std::vector<TransportNode> line(pair.nodes.size());
    for (std::size_t i = 0; i < pair.nodes.size(); ++i)
        line[i] = {pair.nodes[i], pair.nodes[i], pair.logrho[i]};
    const double mass_in = pair.mass;

    for (std::size_t step = 0; step < n; ++step)
        push_one_step(tuple[word(step)], line, pair.mesh_target);

    // cut at folds, then build pairs
    std::vector<std::size_t> cuts = fold_points(line);
    cuts.push_back(line.size() - 1);
    StandardFamily fam;
    std::size_t start = 0;
    for (std::size_t cut : cuts) {
        if (cut <= start) {
            start = cut;
            continue;
        }
        std::vector<TorusPoint> nodes;
        std::vector<double> logrho;
        for (std::size_t i = start; i <= cut; ++i) {
            nodes.push_back(line[i].src);
            logrho.push_back(line[i].logrho);
        }
        if (nodes.size() >= 2)
            fam.add(resample(StandardPair::make(std::move(nodes),
                                                std::move(logrho),
                                                pair.mesh_target)));
        start = cut;
    }
    // quadrature closure across the family
    const double mass_out = fam.total_mass();
    if (mass_out > 0 && mass_in > 0) {
        const double corr = std::log(mass_in / mass_out);
        for (StandardPair& p : fam.pairs) {
            for (double& lr : p.logrho) lr += corr;
            p.mass *= mass_in / mass_out;
        }
    }
    return fam;
}

StandardFamily volume_family(std::size_t N, std::size_t nodes_per_pair) {
    if (N == 0) throw std::invalid_argument("volume_family: N >= 1");
    StandardFamily fam;
    for (std::size_t k = 0; k < N; ++k) {
        const double y =
            (static_cast<double>(k) + 0.5) / static_cast<double>(N);
        std::vector<TorusPoint> nodes(nodes_per_pair);
        for (std::size_t i = 0; i < nodes_per_pair; ++i) {
            const double x = static_cast<double>(i) /
                             static_cast<double>(nodes_per_pair - 1);
            nodes[i] = TorusPoint::reduced(x, y);
        }
        fam.add(StandardPair::make(std::move(nodes),
                                   std::vector<double>(nodes_per_pair, 0.0),
                                   1.0 / static_cast<double>(nodes_per_pair - 1)),
                1.0 / static_cast<double>(N));
    }
    return fam;
}

StandardFamily subdivide_at(const StandardPair& pair,
                            const std::vector<double>& arc_cuts) {
    for (double c : arc_cuts)
        if (c <= 0.0 || c >= pair.length())
            throw std::invalid_argument("subdivide_at: cut outside the domain");
    std::vector<double> cuts = arc_cuts;
    std::sort(cuts.begin(), cuts.end());
    cuts.push_back(pair.length());

    StandardFamily fam;
    double prev = 0.0;
    for (double cut : cuts) {
        std::vector<TorusPoint> nodes;
        std::vector<double> logrho;
        nodes.push_back(pair.point_at_arc(prev));
        logrho.push_back(pair.logrho_at_arc(prev));
        for (std::size_t i = 0; i < pair.nodes.size(); ++i) {
            if (pair.arcs[i] > prev && pair.arcs[i] < cut) {
                nodes.push_back(pair.nodes[i]);
                logrho.push_back(pair.logrho[i]);
            }
        }
        nodes.push_back(pair.point_at_arc(cut));
        logrho.push_back(pair.logrho_at_arc(cut));
        fam.add(StandardPair::make(std::move(nodes), std::move(logrho),
                                   pair.mesh_target));
        prev = cut;
    }
    return fam;
}

StandardFamily subdivide_vertical(const StandardPair& pair,
                                  const std::vector<double>& fractions) {
    double sum = 0.0;
    for (double f : fractions) {
        if (f <= 0.0 || f >= 1.0)
            throw std::invalid_argument("subdivide_vertical: fraction not in (0,1)");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("subdivide_vertical: fractions must sum to 1");
    StandardFamily fam;
    for (double f : fractions) {
        StandardPair piece = pair;
        const double lf = std::log(f);
        for (double& lr : piece.logrho) lr += lf;
        piece.mass = pair.mass * f;  // exact by construction
        fam.add(std::move(piece));
    }
    return fam;
}

std::optional<std::size_t> backwards_good_time(
    const MapTuple& tuple, const WordFn& word, const StandardPair& pair,
    std::size_t x_index, const BackwardsGoodParams& params) {
    const TorusPoint x = pair.nodes[x_index];
    const auto [tx, ty] = pair.tangent_at(x_index);

    const std::size_t base = static_cast<std::size_t>(
        std::ceil(params.A * std::max(params.R, 1.0)));
    const std::size_t n_max = base + params.horizon;
    const CocycleTrace tr = compose_word(tuple, word, n_max, x);
    const std::vector<double> xs = tr.lognorm_increments();

    for (std::size_t i = 0; base + i <= n_max; ++i) {
        const std::size_t n = base + i;
        if (n == 0) continue;
        if (tr.lognorms[n] < std::log(2.0)) continue;
        std::vector<double> prefix(xs.begin(), xs.begin() + n);
        if (tempered_constant(prefix, params.lambda, params.eps, true) < params.C)
            continue;
        const SplitEstimate split = singular_split(tr.products[n]);
        if (split.degenerate) continue;
        const double ang = line_angle(split.theta_s.cx(), split.theta_s.cy(),
                                      tx, ty);
        if (ang >= std::exp(-params.eps_prime * static_cast<double>(i)))
            return n;
    }
    return std::nullopt;
}

}  // namespace rdslab
