#include "rdslab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "rdslab/tempered.hpp"

namespace rdslab {

namespace {

// arc-interval list with merge/intersect/measure helpers
struct Intervals {
    std::vector<std::pair<double, double>> parts;

    void normalize() {
        std::sort(parts.begin(), parts.end());
        std::vector<std::pair<double, double>> merged;
        for (const auto& p : parts) {
            if (p.second <= p.first) continue;
            if (!merged.empty() && p.first <= merged.back().second)
                merged.back().second = std::max(merged.back().second, p.second);
            else
                merged.push_back(p);
        }
        parts = std::move(merged);
    }
    Intervals intersect(const Intervals& other) const {
        Intervals out;
        for (const auto& a : parts)
            for (const auto& b : other.parts) {
                const double lo = std::max(a.first, b.first);
                const double hi = std::min(a.second, b.second);
                if (hi > lo) out.parts.push_back({lo, hi});
            }
        out.normalize();
        return out;
    }
    Intervals trim(double width) const {
        Intervals out;
        for (const auto& p : parts)
            if (p.second - p.first > 2.0 * width)
                out.parts.push_back({p.first + width, p.second - width});
        out.normalize();
        return out;
    }
    Intervals complement(double lo, double hi) const {
        Intervals out;
        double cur = lo;
        for (const auto& p : parts) {
            if (p.first > cur) out.parts.push_back({cur, p.first});
            cur = std::max(cur, p.second);
        }
        if (hi > cur) out.parts.push_back({cur, hi});
        out.normalize();
        return out;
    }
    bool contains(double s, double slack = 0.0) const {
        for (const auto& p : parts)
            if (s >= p.first - slack && s <= p.second + slack) return true;
        return false;
    }
};

double pair_interval_mass(const StandardPair& p, double lo, double hi) {
    lo = std::max(lo, 0.0);
    hi = std::min(hi, p.length());
    if (hi <= lo) return 0.0;
    double m = 0.0;
    double s = lo, rho_s = std::exp(p.logrho_at_arc(lo));
    for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
        const double b = p.arcs[i + 1];
        if (b <= lo || p.arcs[i] >= hi) continue;
        const double t = std::min(b, hi);
        const double rho_t = std::exp(p.logrho_at_arc(t));
        m += 0.5 * (rho_s + rho_t) * (t - s);
        s = t;
        rho_s = rho_t;
    }
    return m;
}

double pair_intervals_mass(const StandardPair& p, const Intervals& iv) {
    double m = 0.0;
    for (const auto& part : iv.parts)
        m += pair_interval_mass(p, part.first, part.second);
    return m;
}

StandardPair subpair(const StandardPair& p, double lo, double hi) {
    lo = std::max(0.0, lo);
    hi = std::min(p.length(), hi);
    std::vector<TorusPoint> nodes;
    std::vector<double> logrho;
    nodes.push_back(p.point_at_arc(lo));
    logrho.push_back(p.logrho_at_arc(lo));
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        if (p.arcs[i] > lo && p.arcs[i] < hi) {
            nodes.push_back(p.nodes[i]);
            logrho.push_back(p.logrho[i]);
        }
    }
    nodes.push_back(p.point_at_arc(hi));
    logrho.push_back(p.logrho_at_arc(hi));
    if (nodes.size() < 2) {
        nodes.push_back(nodes.back());
        logrho.push_back(logrho.back());
    }
    return StandardPair::make(std::move(nodes), std::move(logrho), p.mesh_target);
}

// chart of a near-straight pair over its chord frame, plus the affine
// approximation arc(chart x) = x + offset
struct PairChart {
    CurveChart chart;
    double arc_offset = 0.0;
};

PairChart pair_chart(const StandardPair& p) {
    const std::size_t mid = p.nodes.size() / 2;
    const auto [tx, ty] = p.tangent_at(mid);
    PairChart pc;
    CurveChart& ch = pc.chart;
    ch.frame_angle = std::atan2(ty, tx);
    ch.origin_x = p.nodes[mid].x;
    ch.origin_y = p.nodes[mid].y;
    const double c = std::cos(ch.frame_angle), s = std::sin(ch.frame_angle);
    std::vector<double> xs(p.nodes.size()), ys(p.nodes.size());
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        const double rx = wrap_half(p.nodes[i].x - ch.origin_x);
        const double ry = wrap_half(p.nodes[i].y - ch.origin_y);
        xs[i] = rx * c + ry * s;
        ys[i] = -rx * s + ry * c;
    }
    ch.x0 = *std::min_element(xs.begin(), xs.end());
    ch.x1 = *std::max_element(xs.begin(), xs.end());
    const std::size_t count = std::max<std::size_t>(9, p.nodes.size());
    ch.phi.assign(count, 0.0);
    ch.logrho.assign(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
        const double X = ch.x0 + (ch.x1 - ch.x0) * static_cast<double>(k) /
                                     static_cast<double>(count - 1);
        std::size_t best = 0;
        double bd = 1e18;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double d = std::fabs(xs[i] - X);
            if (d < bd) {
                bd = d;
                best = i;
            }
        }
        ch.phi[k] = ys[best];
        ch.logrho[k] = p.logrho[best];
    }
    pc.arc_offset = p.arcs[mid];
    return pc;
}

}  // namespace

std::variant<Configuration, ConfigFailure> detect_configuration(
    const StandardPair& p1, const StandardPair& p2,
    const ConfigurationParams& params) {
    if (!(params.upsilon > 0.0) || params.upsilon > params.tau * params.delta)
        throw std::invalid_argument(
            "detect_configuration: need 0 < upsilon <= tau * delta");

    const Goodness g1 = goodness(p1);
    const Goodness g2 = goodness(p2);
    const double cap = std::exp(params.C);
    if (g1.c2 > cap || g2.c2 > cap || g1.holder > cap || g2.holder > cap)
        return ConfigFailure::regularity;

    bool any_close = false;
    std::optional<std::pair<std::size_t, std::size_t>> witness;
    double best = params.upsilon;
    for (std::size_t i = 0; i < p1.nodes.size(); i += 2) {
        for (std::size_t j = 0; j < p2.nodes.size(); j += 2) {
            const double d = torus_dist(p1.nodes[i], p2.nodes[j]);
            if (d >= params.upsilon) continue;
            any_close = true;
            const bool int1 = p1.arcs[i] >= params.delta &&
                              p1.length() - p1.arcs[i] >= params.delta;
            const bool int2 = p2.arcs[j] >= params.delta &&
                              p2.length() - p2.arcs[j] >= params.delta;
            if (!int1 || !int2) continue;
            if (d < best) {
                best = d;
                witness = {i, j};
            }
        }
    }
    if (!witness)
        return any_close ? ConfigFailure::margin : ConfigFailure::proximity;

    Configuration cfg;
    cfg.arc1 = p1.arcs[witness->first];
    cfg.arc2 = p2.arcs[witness->second];
    cfg.x = p1.nodes[witness->first];
    cfg.y = p2.nodes[witness->second];

    const auto [t1x, t1y] = p1.tangent_at(witness->first);
    const auto [t2x, t2y] = p2.tangent_at(witness->second);
    const double th1 = std::atan2(t1y, t1x);
    const double th2 = std::atan2(t2y, t2x);
    for (std::size_t c = 0; c < params.cones.size(); ++c) {
        const auto [center, halfwidth] = params.cones[c];
        const double m1 = angle_dist(center, th1) - halfwidth;
        const double m2 = angle_dist(center, th2) - halfwidth;
        if (m1 >= params.theta0 && m2 >= params.theta0) {
            cfg.cone_index = static_cast<int>(c);
            cfg.cone_center = center;
            cfg.cone_halfwidth = halfwidth;
            return cfg;
        }
    }
    return ConfigFailure::transversality;
}

std::vector<std::pair<double, double>> calibrate_cones(const MapTuple& tuple,
                                                       const TorusPoint& x,
                                                       std::size_t n,
                                                       std::size_t W,
                                                       std::uint64_t seed) {
    const DirectionHistogram h =
        stable_direction_distribution(tuple, x, n, W, seed, 0, 64);
    std::vector<double> s = h.samples;
    std::sort(s.begin(), s.end());
    if (s.size() < 16) return {{M_PI / 2.0, 0.30}};
    // rotate the largest circular gap to the seam so the support band is
    // contiguous in [0, pi)
    double max_gap = M_PI - s.back() + s.front();
    double rotate = s.front() > max_gap / 2 ? 0.0 : s.back() + max_gap / 2;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        const double g = s[i + 1] - s[i];
        if (g > max_gap) {
            max_gap = g;
            rotate = s[i] + g / 2;
        }
    }
    if (rotate != 0.0) {
        for (double& v : s)
            v = std::fmod(v - rotate + 2.0 * M_PI, M_PI);
        std::sort(s.begin(), s.end());
    }
    auto quant = [&](double q) {
        const double raw =
            s[static_cast<std::size_t>(q * static_cast<double>(s.size() - 1))];
        return std::fmod(raw + rotate, M_PI);
    };
    auto band = [&](double qlo, double qhi) {
        const double lo =
            s[static_cast<std::size_t>(qlo * static_cast<double>(s.size() - 1))];
        const double hi =
            s[static_cast<std::size_t>(qhi * static_cast<double>(s.size() - 1))];
        const double center = std::fmod(0.5 * (lo + hi) + rotate, M_PI);
        return std::pair<double, double>{center < 0 ? center + M_PI : center,
                                         0.55 * (hi - lo)};
    };
    (void)quant;
    return {band(0.05, 0.95), band(0.05, 0.35), band(0.35, 0.65),
            band(0.65, 0.95)};
}

bool CouplingRecord::conservation_ok(double tol) const {
    double coupled = 0.0, stopped = 0.0;
    for (const auto& s : steps) {
        coupled += s.coupled;
        stopped += s.stopped;
    }
    const double last_res = steps.empty() ? initial_mass : steps.back().residual;
    return std::fabs(coupled + stopped + last_res - initial_mass) <=
           tol * std::max(1.0, initial_mass);
}

bool CouplingRecord::residual_monotone() const {
    for (std::size_t i = 1; i < steps.size(); ++i)
        if (steps[i].residual > steps[i - 1].residual + 1e-12) return false;
    return true;
}

LocalCoupleResult local_couple(const MapTuple& tuple, const StandardPair& p1,
                               const StandardPair& p2, const WordFn& word,
                               const Configuration& config,
                               const CouplingParams& params) {
    if (std::fabs(p1.mass - p2.mass) > 1e-9 * std::max(1.0, p1.mass))
        throw std::invalid_argument("local_couple: masses must be equal");

    LocalCoupleResult out;
    CouplingRecord& rec = out.record;
    rec.initial_mass = p1.mass;

    const std::size_t nodes = p1.nodes.size();
    const std::size_t N0 = params.N0;
    const std::size_t horizon = std::max(params.horizon, N0 + 1);
    const double Lmax = std::log(tuple.c1_bound);

    // Per-node cocycle scans along gamma_1: strict and relaxed tempered
    // certificates plus the padding radius delta_n.
    struct NodeScan {
        ScaledMat prod;
        TorusPoint pt;
        double minb_strict = std::numeric_limits<double>::infinity();
        double minb_relax = std::numeric_limits<double>::infinity();
        double cstar_strict = std::numeric_limits<double>::infinity();
        double cstar_relax = std::numeric_limits<double>::infinity();
        double running_B = 1.0;  // max_m exp(lognorm_m - m lambda'/2)
        double lognorm = 0.0;
        bool strict = true;
        bool relax = true;
        double theta_s = M_PI / 2;
        double delta_n = 0.0;
    };
    std::vector<NodeScan> st(nodes);
    for (std::size_t j = 0; j < nodes; ++j) st[j].pt = p1.nodes[j];

    const double C_strict = -params.C;
    const double C_relax = -(params.C + params.relax_offset);
    const double lam_relax = params.lambda_prime;
    const double eps_relax = 2.0 * params.eps;
    const double cone2 = std::min(2.0 * config.cone_halfwidth, 1.45);

    const PairChart pc2 = pair_chart(p2);
    auto holonomy_arc = [&](double s1, std::size_t n) -> std::optional<double> {
        const TorusPoint y = p1.point_at_arc(s1);
        FakeLeaf leaf;
        try {
            leaf = fake_stable_leaf(tuple, word, y, n, params.leaf);
        } catch (const LeafError&) {
            return std::nullopt;
        }
        const auto hit = leaf_transversal_intersection(leaf, pc2.chart);
        if (!hit) return std::nullopt;
        return *hit + pc2.arc_offset;
    };

    Intervals current;
    double massP = 0.0;
    double discount = 1.0;
    double a0_eff = params.a0;
    bool started = false;
    bool strict_kept = true;

    for (std::size_t n = 1; n <= horizon; ++n) {
        const unsigned sym = word(n - 1);
        const double nd = static_cast<double>(n);
        for (std::size_t j = 0; j < nodes; ++j) {
            NodeScan& s = st[j];
            auto [img, df] = tuple[sym].evaluate(s.pt);
            s.pt = img;
            s.prod.absorb(df);
            const double new_lognorm = s.prod.lognorm();
            // scalar tempered scans on the log-norm increments
            const double jd = nd - 1.0;
            const double Sj = s.lognorm;  // prefix sum of increments
            s.minb_strict = std::min(
                s.minb_strict, (params.eps * jd + params.lambda * jd) - Sj);
            s.minb_relax = std::min(
                s.minb_relax, (eps_relax * jd + lam_relax * jd) - Sj);
            s.lognorm = new_lognorm;
            s.cstar_strict =
                std::min(s.cstar_strict,
                         (new_lognorm - params.lambda * nd) + s.minb_strict);
            s.cstar_relax = std::min(
                s.cstar_relax, (new_lognorm - lam_relax * nd) + s.minb_relax);
            s.running_B = std::max(
                s.running_B,
                std::exp(new_lognorm - nd * params.lambda_prime / 2.0));
            const SplitEstimate split = singular_split(s.prod);
            s.theta_s = split.theta_s.theta;
            const bool cone_ok_strict =
                !split.degenerate &&
                angle_dist(s.theta_s, config.cone_center) <=
                    config.cone_halfwidth;
            const bool cone_ok_relax =
                !split.degenerate &&
                angle_dist(s.theta_s, config.cone_center) <= cone2;
            // after the burn-in N0 the cone condition joins the certificate
            if (n >= N0) {
                s.strict = s.strict && s.cstar_strict >= C_strict &&
                           cone_ok_strict && s.lognorm >= std::log(2.0);
                s.relax = s.relax && s.cstar_relax >= C_relax && cone_ok_relax;
            }
            const double eta_n =
                1.0 / (4.0 * s.running_B *
                       std::exp(nd * params.lambda_prime / 2.0));
            s.delta_n = std::pow(eta_n, 1.0 + params.sigma);
        }
        if (n < N0) continue;

        // Active set: maximal runs of relax-tempered nodes, shrunk by the
        // padding radius delta_n at each run edge (a point is padded when
        // its delta_n-ball stays inside the tempered run).
        Intervals fresh;
        std::size_t run_start = nodes;
        for (std::size_t j = 0; j <= nodes; ++j) {
            const bool ok = (j < nodes) && st[j].relax;
            if (ok && run_start == nodes) run_start = j;
            if (!ok && run_start < nodes) {
                const std::size_t last = j - 1;
                const double lo = p1.arcs[run_start] + st[run_start].delta_n;
                const double hi = p1.arcs[last] - st[last].delta_n;
                if (hi > lo) fresh.parts.push_back({lo, hi});
                run_start = nodes;
            }
        }
        fresh.normalize();
        Intervals next =
            fresh.trim(params.K1 * std::exp(-4.0 * Lmax * nd));
        if (started) next = next.intersect(current);

        if (!started) {
            // first fake-coupling time: fix a0_eff from the density
            // comparison along the holonomy at time N0
            current = next;
            double ratio_min = std::numeric_limits<double>::infinity();
            for (const auto& part : current.parts) {
                for (double frac : {0.1, 0.5, 0.9}) {
                    const double s1 = part.first + frac * (part.second - part.first);
                    const auto s2 = holonomy_arc(s1, n);
                    if (!s2) continue;
                    const double rho1 = std::exp(p1.logrho_at_arc(s1));
                    const double rho2 = std::exp(p2.logrho_at_arc(*s2));
                    ratio_min = std::min(ratio_min, rho2 / rho1);
                }
            }
            if (std::isfinite(ratio_min))
                a0_eff = std::min(params.a0, 0.9 * ratio_min);
            massP = a0_eff * pair_intervals_mass(p1, current);
            rec.a0_effective = a0_eff;
            started = true;
            rec.steps.push_back({n, 0.0, rec.initial_mass - massP, massP});
            continue;
        }

        // density discount and interval shrink
        const double keep = 1.0 - std::exp(-nd * params.eta_hat);
        const double new_discount = discount * keep;
        const double new_mass =
            a0_eff * new_discount * pair_intervals_mass(p1, next);
        const double stopped = massP - new_mass;

        // record matched blocks for intervals dropped at this step
        Intervals dropped;
        {
            Intervals prev_only = current;
            for (const auto& part : next.parts) {
                Intervals cut;
                cut.parts = {part};
                prev_only = prev_only.intersect(cut.complement(0.0, p1.length()));
            }
            dropped = prev_only;
        }
        for (const auto& d : dropped.parts) {
            if (d.second - d.first < 1e-12) continue;
            MatchedBlock blk;
            blk.source_lo = d.first;
            blk.source_hi = d.second;
            const auto ilo = holonomy_arc(d.first, n);
            const auto ihi = holonomy_arc(d.second, n);
            if (ilo && ihi) {
                blk.target_lo = std::min(*ilo, *ihi);
                blk.target_hi = std::max(*ilo, *ihi);
            }
            blk.mass = a0_eff * discount * pair_interval_mass(p1, d.first, d.second);
            blk.stop_time = n;
            rec.blocks.push_back(blk);
        }

        // residual pieces for recovery (bins: exact weights)
        for (const auto& d : dropped.parts) {
            if (d.second - d.first < 4.0 * p1.mesh_target) continue;
            MassPiece mp1{subpair(p1, d.first, d.second),
                          a0_eff * discount, 0};
            const auto ilo = holonomy_arc(d.first, n);
            const auto ihi = holonomy_arc(d.second, n);
            out.residual1.push_back(mp1);
            if (ilo && ihi && std::fabs(*ihi - *ilo) > 4.0 * p2.mesh_target) {
                StandardPair sp2 =
                    subpair(p2, std::min(*ilo, *ihi), std::max(*ilo, *ihi));
                // equalize the bin mass exactly through the weight
                const double w2 =
                    sp2.mass > 0 ? mp1.mass() / sp2.mass : 0.0;
                out.residual2.push_back({std::move(sp2), w2, 0});
            } else {
                // fall back to the proximal window on gamma_2
                StandardPair sp2 = subpair(p2, d.first, d.second);
                const double w2 = sp2.mass > 0 ? mp1.mass() / sp2.mass : 0.0;
                out.residual2.push_back({std::move(sp2), w2, 0});
            }
        }

        current = next;
        discount = new_discount;
        massP = new_mass;
        rec.steps.push_back({n, 0.0, stopped, massP});

        // strict points interior to their tempered run must stay active;
        // run-edge nodes may be shaved by the padding radius
        for (std::size_t j = 1; j + 1 < nodes; ++j) {
            if (st[j].strict && st[j - 1].relax && st[j + 1].relax &&
                !current.contains(p1.arcs[j], p1.mesh_target))
                strict_kept = false;
        }
    }

    // horizon: surviving mass couples along the final fake leaves
    rec.coupled_mass = massP;
    if (!rec.steps.empty()) {
        rec.steps.back().coupled = massP;
        rec.steps.back().residual = 0.0;
    }
    double stopped_total = 0.0;
    for (const auto& s : rec.steps) stopped_total += s.stopped;
    rec.stopped_mass = stopped_total;
    rec.residual_mass = 0.0;
    rec.floor_b0 = a0_eff;
    out.strict_points_kept = strict_kept;

    // coupled sample pairs (x, Upsilon x) on strict surviving nodes
    std::size_t sampled = 0;
    for (std::size_t j = 0; j < nodes && sampled < 24; j += std::max<std::size_t>(1, nodes / 24)) {
        if (!st[j].strict || !current.contains(p1.arcs[j])) continue;
        const auto s2 = holonomy_arc(p1.arcs[j], horizon);
        if (!s2) continue;
        rec.samples.push_back(
            {p1.nodes[j], p2.point_at_arc(*s2), horizon});
        ++sampled;
    }

    // the never-entered complement mass never joined P: it was stopped at N0
    {
        Intervals comp = current;  // placeholder; recompute from step-N0 set
    }
    // residual pieces for the initial stop: complement of the first active
    // set carries full density, the active set keeps the (1 - a0) slice
    // (reconstructed from the ledger's first step)
    if (!rec.steps.empty()) {
        // complement pieces
        // recompute the N0 active set as the union of all block sources and
        // the final set is unavailable here; approximate with the recorded
        // first residual: the initial stopped mass is carried as one piece
        // over the full curve with the exact weight.
        const double first_stopped = rec.steps.front().stopped;
        if (first_stopped > 0.0 && p1.mass > 0.0) {
            const double w = first_stopped / p1.mass;
            out.residual1.push_back({p1, w, 0});
            out.residual2.push_back({p2, first_stopped / p2.mass, 0});
        }
        // per-step discount slices over the active set are small; carry them
        // as weight-scaled copies of the active windows
        double slice_total = 0.0;
        for (std::size_t k = 1; k < rec.steps.size(); ++k)
            slice_total += rec.steps[k].stopped;
        double blocks_total = 0.0;
        for (const auto& b : rec.blocks) blocks_total += b.mass;
        const double slices = std::max(0.0, slice_total - blocks_total);
        if (slices > 0.0 && p1.mass > 0.0) {
            out.residual1.push_back({p1, slices / p1.mass, 0});
            out.residual2.push_back({p2, slices / p2.mass, 0});
        }
    }
    return out;
}

RecoveryResult coupled_recovery(const MapTuple& tuple,
                                std::vector<MassPiece> f1,
                                std::vector<MassPiece> f2, const WordFn& word,
                                const CouplingParams& params) {
    RecoveryResult res;
    const std::size_t block_len = (params.block_q + 1) * params.block_delta;

    struct Candidate {
        MassPiece piece;  // recovered block, geometry at stop_time
        std::size_t stop_time;
    };

    auto harvest = [&](std::vector<MassPiece>& family, std::size_t block)
        -> std::vector<Candidate> {
        std::vector<Candidate> found;
        std::vector<MassPiece> keep;
        for (MassPiece& mp : family) {
            const std::size_t b = mp.birth_time;
            const std::size_t lo_t =
                b + block * block_len + params.block_q * params.block_delta;
            const std::size_t hi_t = b + (block + 1) * block_len;
            bool stopped = false;
            if (mp.pair.nodes.size() >= 5 && mp.mass() > 1e-12) {
                BackwardsGoodParams bg = params.recover;
                bg.R = std::max(goodness(mp.pair).R, 1.0);
                const std::size_t probe = mp.pair.nodes.size() / 2;
                auto shifted = [&](std::uint64_t i) { return word(i + b); };
                const std::size_t base = static_cast<std::size_t>(
                    std::ceil(bg.A * std::max(bg.R, 1.0)));
                bg.horizon = hi_t > b + base ? hi_t - b - base : 0;
                const auto T =
                    backwards_good_time(tuple, shifted, mp.pair, probe, bg);
                if (T && *T + b > lo_t && *T + b <= hi_t) {
                    // recovered neighborhood size: scale the target length
                    // by the tangent stretch so the pushed block stays short
                    const double s = mp.pair.arcs[probe];
                    const auto [tx, ty] = mp.pair.tangent_at(probe);
                    double vx = tx, vy = ty, log_stretch = 0.0;
                    TorusPoint q = mp.pair.nodes[probe];
                    for (std::size_t k = 0; k < *T; ++k) {
                        auto [img, df] = tuple[shifted(k)].evaluate(q);
                        q = img;
                        const auto iv = df.apply(vx, vy);
                        const double nrm = std::hypot(iv[0], iv[1]);
                        vx = iv[0] / nrm;
                        vy = iv[1] / nrm;
                        log_stretch += std::log(nrm);
                    }
                    const double target_len = 0.08;
                    double radius = std::min(
                        mp.pair.length() / 2.0,
                        0.5 * target_len * std::exp(-log_stretch));
                    radius = std::max(radius, 3.0 * mp.pair.mesh_target);
                    for (int attempt = 0; attempt < 6 && !stopped; ++attempt) {
                        const StandardPair cand =
                            subpair(mp.pair, s - radius, s + radius);
                        if (cand.nodes.size() < 5) break;
                        const StandardFamily pushed =
                            push_pair(tuple, shifted, *T, cand);
                        if (pushed.pairs.size() == 1 &&
                            pushed.pairs[0].nodes.size() >= 5 &&
                            goodness(pushed.pairs[0]).R <= params.recover_C0) {
                            found.push_back(Candidate{
                                {pushed.pairs[0], mp.weight, b + *T}, b + *T});
                            if (s - radius > 4.0 * mp.pair.mesh_target)
                                keep.push_back({subpair(mp.pair, 0.0, s - radius),
                                                mp.weight, b});
                            if (mp.pair.length() - (s + radius) >
                                4.0 * mp.pair.mesh_target)
                                keep.push_back({subpair(mp.pair, s + radius,
                                                        mp.pair.length()),
                                                mp.weight, b});
                            stopped = true;
                        } else {
                            radius /= 2.0;
                            if (radius < 3.0 * mp.pair.mesh_target) break;
                        }
                    }
                }
            }
            if (!stopped) keep.push_back(std::move(mp));
        }
        family = std::move(keep);
        return found;
    };

    auto total_mass = [](const std::vector<MassPiece>& fam) {
        double m = 0.0;
        for (const MassPiece& mp : fam) m += mp.mass();
        return m;
    };

    for (std::size_t block = 0; block < params.recovery_max_blocks; ++block) {
        std::vector<Candidate> c1 = harvest(f1, block);
        std::vector<Candidate> c2 = harvest(f2, block);
        auto bigger = [](const Candidate& a, const Candidate& b) {
            return a.piece.mass() > b.piece.mass();
        };
        std::sort(c1.begin(), c1.end(), bigger);
        std::sort(c2.begin(), c2.end(), bigger);
        // greedy equal-mass matching (exact weight splits); candidates whose
        // stop times differ by more than 8 steps wait for a later block
        std::vector<char> used(c2.size(), 0);
        for (Candidate& a : c1) {
            if (a.piece.mass() <= 1e-14) continue;
            std::size_t pick = c2.size();
            for (std::size_t j = 0; j < c2.size(); ++j) {
                if (used[j] || c2[j].piece.mass() <= 1e-14) continue;
                const std::size_t dt = a.stop_time > c2[j].stop_time
                                           ? a.stop_time - c2[j].stop_time
                                           : c2[j].stop_time - a.stop_time;
                if (dt <= 8) {
                    pick = j;
                    break;
                }
            }
            if (pick == c2.size()) {
                f1.push_back(a.piece);
                continue;
            }
            used[pick] = 1;
            Candidate& b = c2[pick];
            const double m = std::min(a.piece.mass(), b.piece.mass());
            RecoveryResult::BlockPair bp;
            bp.side1 = a.piece;
            bp.side1.weight = a.piece.weight * (m / a.piece.mass());
            bp.side2 = b.piece;
            bp.side2.weight = b.piece.weight * (m / b.piece.mass());
            bp.stop_time = std::max(a.stop_time, b.stop_time);
            res.matched.push_back(bp);
            const double ra = 1.0 - m / a.piece.mass();
            const double rb = 1.0 - m / b.piece.mass();
            if (ra > 1e-14) {
                MassPiece rest = a.piece;
                rest.weight *= ra;
                f1.push_back(rest);
            }
            if (rb > 1e-14) {
                MassPiece rest = b.piece;
                rest.weight *= rb;
                f2.push_back(rest);
            }
        }
        for (std::size_t j = 0; j < c2.size(); ++j)
            if (!used[j] && c2[j].piece.mass() > 1e-14)
                f2.push_back(c2[j].piece);

        res.tail.push_back({(block + 1) * block_len, 0.0, 0.0,
                            std::max(total_mass(f1), total_mass(f2))});
        if (f1.empty() && f2.empty()) break;
    }
    res.carried1 = std::move(f1);
    res.carried2 = std::move(f2);
    return res;
}

namespace {

// push a short block forward with splitting; pairs longer than the cap are
// cut so no representation ever explodes
std::vector<MassPiece> push_block(const MapTuple& tuple, const WordFn& word,
                                  const MassPiece& mp, std::size_t steps,
                                  double length_cap = 0.5) {
    std::vector<MassPiece> cur{mp};
    for (std::size_t k = 0; k < steps; ++k) {
        std::vector<MassPiece> next;
        for (const MassPiece& piece : cur) {
            auto shifted = [&](std::uint64_t i) {
                return word(i + piece.birth_time);
            };
            const StandardFamily fam = push_pair(tuple, shifted, 1, piece.pair);
            for (std::size_t q = 0; q < fam.pairs.size(); ++q) {
                MassPiece child{fam.pairs[q], piece.weight * fam.weights[q],
                                piece.birth_time + 1};
                if (child.pair.length() > length_cap) {
                    std::vector<double> cuts;
                    for (double c = length_cap; c < child.pair.length();
                         c += length_cap)
                        cuts.push_back(c);
                    const StandardFamily split =
                        subdivide_at(child.pair, cuts);
                    for (std::size_t r = 0; r < split.pairs.size(); ++r)
                        next.push_back({split.pairs[r], child.weight,
                                        child.birth_time});
                } else {
                    next.push_back(std::move(child));
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

}  // namespace

RunResult run_coupling(const StandardPair& p1, const StandardPair& p2,
                       const MapTuple& tuple, std::uint64_t seed,
                       std::uint64_t stream, const CouplingParams& params) {
    const WordStream ws(seed, stream, static_cast<unsigned>(tuple.size()));
    auto word = [&ws](std::uint64_t i) { return ws.symbol(i); };

    RunResult run;
    run.record.initial_mass = p1.mass;
    const double initial = p1.mass;

    struct Attempt {
        MassPiece a, b;  // equal masses, common birth time
    };
    std::vector<Attempt> attempts;
    attempts.push_back({{p1, 1.0, 0}, {p2, 1.0, 0}});

    std::map<std::size_t, CouplingStepLedger> ledger;
    std::vector<std::pair<std::size_t, double>> coupled_events;
    double coupled_total = 0.0;
    double attempted_total = 0.0;
    std::size_t attempt_count = 0;

    ConfigurationParams cfg_params;
    cfg_params.C = params.C;
    cfg_params.delta = std::max(1e-3, params.leaf.delta / 2.0);
    cfg_params.upsilon = cfg_params.tau * cfg_params.delta;
    cfg_params.theta0 = params.theta0;
    cfg_params.cones = calibrate_cones(
        tuple, p1.nodes[p1.nodes.size() / 2], 20, 400, seed ^ 0x5ca1ab1eULL);

    std::size_t periods = 0;
    double residual = initial;
    while (!attempts.empty() && periods < params.max_periods &&
           residual > params.residual_target * initial) {
        ++periods;
        const double residual_at_start = residual;
        const double coupled_at_start = coupled_total;
        std::vector<MassPiece> pool1, pool2;

        for (Attempt& at : attempts) {
            const std::size_t t = at.a.birth_time;
            const auto det = detect_configuration(at.a.pair, at.b.pair,
                                                  cfg_params);
            if (std::holds_alternative<Configuration>(det)) {
                const double m = std::min(at.a.mass(), at.b.mass());
                StandardPair pa = at.a.pair, pb = at.b.pair;
                {
                    const double la = std::log(m / pa.mass);
                    for (double& lr : pa.logrho) lr += la;
                    pa.mass = m;
                    const double lb = std::log(m / pb.mass);
                    for (double& lr : pb.logrho) lr += lb;
                    pb.mass = m;
                }
                auto shifted = [&](std::uint64_t i) { return word(i + t); };
                const LocalCoupleResult lc =
                    local_couple(tuple, pa, pb, shifted,
                                 std::get<Configuration>(det), params);
                ++attempt_count;
                attempted_total += m;
                coupled_total += lc.record.coupled_mass;
                if (lc.record.coupled_mass > 0.0)
                    coupled_events.push_back(
                        {t + params.horizon, lc.record.coupled_mass});
                for (const auto& srow : lc.record.steps) {
                    CouplingStepLedger& row = ledger[t + srow.n];
                    row.n = t + srow.n;
                    row.coupled += srow.coupled;
                    row.stopped += srow.stopped;
                }
                for (const auto& smp : lc.record.samples)
                    run.record.samples.push_back({smp.x, smp.ux, t + smp.T});
                for (const auto& blk : lc.record.blocks)
                    run.record.blocks.push_back(blk);
                for (MassPiece mp : lc.residual1) {
                    mp.birth_time += t;
                    pool1.push_back(std::move(mp));
                }
                for (MassPiece mp : lc.residual2) {
                    mp.birth_time += t;
                    pool2.push_back(std::move(mp));
                }
                // slack mass beyond the equalized attempt re-enters the pool
                if (at.a.mass() > m + 1e-14) {
                    MassPiece rest = at.a;
                    rest.weight *= (at.a.mass() - m) / at.a.mass();
                    pool1.push_back(rest);
                }
                if (at.b.mass() > m + 1e-14) {
                    MassPiece rest = at.b;
                    rest.weight *= (at.b.mass() - m) / at.b.mass();
                    pool2.push_back(rest);
                }
            } else {
                // precoupling: spread both blocks N0 steps with splitting,
                // then greedily pair near witnesses below
                for (MassPiece& mp :
                     push_block(tuple, word, at.a, params.N0))
                    pool1.push_back(std::move(mp));
                for (MassPiece& mp :
                     push_block(tuple, word, at.b, params.N0))
                    pool2.push_back(std::move(mp));
            }
        }
        attempts.clear();

        // recovery on the pooled residuals
        const RecoveryResult rr =
            coupled_recovery(tuple, pool1, pool2, word, params);

        // matched recovered blocks become next-period attempts once both
        // sides share a time (push the earlier side forward)
        for (const auto& bp : rr.matched) {
            MassPiece a = bp.side1, b = bp.side2;
            if (a.birth_time < bp.stop_time) {
                auto moved =
                    push_block(tuple, word, a, bp.stop_time - a.birth_time);
                if (moved.size() != 1) {
                    for (auto& mp : moved) pool1.push_back(mp);
                    pool2.push_back(b);
                    continue;
                }
                a = moved[0];
            }
            if (b.birth_time < bp.stop_time) {
                auto moved =
                    push_block(tuple, word, b, bp.stop_time - b.birth_time);
                if (moved.size() != 1) {
                    for (auto& mp : moved) pool2.push_back(mp);
                    pool1.push_back(a);
                    continue;
                }
                b = moved[0];
            }
            attempts.push_back({a, b});
        }

        // greedy nearest-witness pairing of leftover carried pieces that
        // happen to share a time
        std::vector<MassPiece> carry1 = rr.carried1;
        std::vector<MassPiece> carry2 = rr.carried2;
        auto centroid = [](const MassPiece& mp) {
            return mp.pair.nodes[mp.pair.nodes.size() / 2];
        };
        std::vector<char> used(carry2.size(), 0);
        for (MassPiece& a : carry1) {
            if (a.mass() <= 1e-13) continue;
            std::size_t best = carry2.size();
            double bd = 1e18;
            for (std::size_t j = 0; j < carry2.size(); ++j) {
                if (used[j] || carry2[j].mass() <= 1e-13) continue;
                if (carry2[j].birth_time != a.birth_time) continue;
                const double d = torus_dist(centroid(a), centroid(carry2[j]));
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            if (best == carry2.size()) continue;
            used[best] = 1;
            attempts.push_back({a, carry2[best]});
            a.weight = 0.0;
        }

        residual = initial - coupled_total;
        run.period_residual.push_back(residual / initial);
        run.period_coupled_fraction.push_back(
            residual_at_start > 0
                ? (coupled_total - coupled_at_start) / residual_at_start
                : 0.0);
    }

    run.periods = periods;
    run.horizon_exhausted = residual > params.residual_target * initial;
    run.per_attempt_coupled_fraction =
        attempted_total > 0 ? coupled_total / attempted_total : 0.0;
    (void)attempt_count;

    run.record.coupled_mass = coupled_total;
    run.record.residual_mass = initial - coupled_total;
    std::sort(coupled_events.begin(), coupled_events.end());
    double acc = 0.0;
    std::size_t ev = 0;
    const std::size_t n_max =
        ledger.empty() ? params.horizon : ledger.rbegin()->first;
    for (std::size_t n = 0; n <= n_max + 1; ++n) {
        while (ev < coupled_events.size() && coupled_events[ev].first <= n)
            acc += coupled_events[ev++].second;
        run.tail_n.push_back(static_cast<double>(n));
        run.tail_prob.push_back((initial - acc) / initial);
    }
    double stopped_cum = 0.0;
    for (auto& [n, row] : ledger) {
        stopped_cum += row.stopped;
        run.record.steps.push_back(row);
    }
    {
        double acc2 = 0.0;
        std::size_t ev2 = 0;
        for (auto& row : run.record.steps) {
            while (ev2 < coupled_events.size() &&
                   coupled_events[ev2].first <= row.n)
                acc2 += coupled_events[ev2++].second;
            row.residual = initial - acc2;
        }
    }
    run.record.stopped_mass = stopped_cum;
    return run;
}

}  // namespace rdslab
