#include "rdslab/lab.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "rdslab/coupling.hpp"
#include "rdslab/expansion.hpp"
#include "rdslab/fake_leaf.hpp"
#include "rdslab/graph_transform.hpp"
#include "rdslab/lyapunov_metric.hpp"
#include "rdslab/mixing.hpp"
#include "rdslab/pairs.hpp"
#include "rdslab/tempered.hpp"

namespace rdslab {

namespace {

constexpr const char* kVersion = "rdslab 1.0.0";

// ---------------------------------------------------------------- sha-256
struct Sha256 {
    std::uint32_t h[8] = {0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a,
                          0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19};
    static std::uint32_t rotr(std::uint32_t v, int k) {
        return (v >> k) | (v << (32 - k));
    }
    void block(const unsigned char* p) {
        static const std::uint32_t K[64] = {
            0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b,
            0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01,
            0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7,
            0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc,
            0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152,
            0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
            0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
            0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85,
            0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
            0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08,
            0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f,
            0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
            0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};
        std::uint32_t w[64];
        for (int i = 0; i < 16; ++i)
            w[i] = (std::uint32_t(p[4 * i]) << 24) |
                   (std::uint32_t(p[4 * i + 1]) << 16) |
                   (std::uint32_t(p[4 * i + 2]) << 8) | p[4 * i + 3];
        for (int i = 16; i < 64; ++i) {
            const std::uint32_t s0 =
                rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
            const std::uint32_t s1 =
                rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
            w[i] = w[i - 16] + s0 + w[i - 7] + s1;
        }
        std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4],
                      f = h[5], g = h[6], hh = h[7];
        for (int i = 0; i < 64; ++i) {
            const std::uint32_t S1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const std::uint32_t ch = (e & f) ^ (~e & g);
            const std::uint32_t t1 = hh + S1 + ch + K[i] + w[i];
            const std::uint32_t S0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const std::uint32_t mj = (a & b) ^ (a & c) ^ (b & c);
            const std::uint32_t t2 = S0 + mj;
            hh = g;
            g = f;
            f = e;
            e = d + t1;
            d = c;
            c = b;
            b = a;
            a = t1 + t2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    Sha256 s;
    const std::size_t n = bytes.size();
    std::size_t i = 0;
    for (; i + 64 <= n; i += 64)
        s.block(reinterpret_cast<const unsigned char*>(bytes.data()) + i);
    unsigned char last[128] = {};
    const std::size_t rem = n - i;
    std::memcpy(last, bytes.data() + i, rem);
    last[rem] = 0x80;
    const std::size_t total = rem + 1 <= 56 ? 64 : 128;
    const std::uint64_t bits = std::uint64_t(n) * 8;
    for (int b = 0; b < 8; ++b)
        last[total - 1 - b] = static_cast<unsigned char>(bits >> (8 * b));
    s.block(last);
    if (total == 128) s.block(last + 64);
    char hex[65];
    for (int k = 0; k < 8; ++k) std::snprintf(hex + 8 * k, 9, "%08x", s.h[k]);
    return std::string(hex, 64);
}

// ----------------------------------------------------------------- config

namespace {

using nlohmann::json;

const std::map<std::string, std::map<std::string, double>>& kind_defaults() {
    static const std::map<std::string, std::map<std::string, double>> defs = {
        {"verify-expansion",
         {{"n0", 0}, {"n0_max", 8}, {"grid_G", 16}, {"grid_D", 128},
          {"cap", 1e6}, {"mc_samples", 0}, {"confidence_delta", 0.05}}},
        {"tempered",
         {{"n", 200}, {"lambda", 0.45}, {"eps", 0.04}, {"C0", 0.0},
          {"x", 0.41}, {"y", 0.27}}},
        {"stable-dist",
         {{"n", 25}, {"words", 4000}, {"bins", 256}, {"x", 0.41}, {"y", 0.27}}},
        {"lyapunov",
         {{"n", 40}, {"lambda", 0.45}, {"lambda_prime", 0.30}, {"x", 0.41},
          {"y", 0.27}}},
        {"graph-transform",
         {{"iters", 40}, {"sigma1", 2.0}, {"sigma2", 0.5}, {"kick", 1e-4},
          {"phi_slope", 1.0}, {"halflen", 0.3}, {"mesh_nodes", 121}}},
        {"fake-stable",
         {{"n", 12}, {"delta", 0.015}, {"mesh", 1e-3}, {"x", 0.31},
          {"y", 0.47}}},
        {"holonomy",
         {{"n", 12}, {"delta", 0.012}, {"mesh", 1e-3}, {"offset", 0.004},
          {"sources", 5}, {"x", 0.44}, {"y", 0.69}}},
        {"recovery",
         {{"words", 1000}, {"C", -3.0}, {"lambda", 0.4}, {"eps", 0.05},
          {"A", 2.0}, {"eps_prime", 0.1}, {"horizon", 60}, {"x", 0.2},
          {"y", 0.4}, {"len", 0.3}, {"angle", 0.0}}},
        {"couple",
         {{"N0", 6}, {"horizon", 22}, {"a0", 0.25}, {"eta_hat", 0.10},
          {"lambda", 0.45}, {"eps", 0.04}, {"lambda_prime", 0.30},
          {"sigma", 0.15}, {"C", 2.5}, {"leaf_delta", 0.012},
          {"leaf_mesh", 1e-3}, {"max_periods", 6}, {"gap", 0.002},
          {"len", 0.08}}},
        {"mixing",
         {{"nmax", 25}, {"lattice", 512}, {"words", 50}, {"phi_p", 1},
          {"phi_q", 0}, {"psi_p", 1}, {"psi_q", 0}, {"floor", 1e-12},
          {"mc_samples", 0}}},
    };
    return defs;
}

}  // namespace

std::string ExperimentConfig::resolved_json() const {
    json j;
    j["experiment"] = experiment;
    j["tuple"] = json::parse(tuple_json);
    j["seed"] = seed;
    j["streams"] = streams;
    j["out"] = out_dir;
    j["plots"] = plots;
    json p;
    for (const auto& [k, v] : params) p[k] = v;
    j["params"] = p;
    return j.dump(2) + "\n";
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& experiment_override,
                              const std::string& out_override,
                              const std::uint64_t* seed_override,
                              const std::uint64_t* streams_override) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    static const std::set<std::string> top = {"experiment", "tuple",  "seed",
                                              "streams",    "out",    "plots",
                                              "params"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!top.count(key))
            throw ConfigError("config: unknown field '" + key + "'");
    }
    ExperimentConfig cfg;
    cfg.experiment = !experiment_override.empty()
                         ? experiment_override
                         : j.value("experiment", std::string());
    if (cfg.experiment.empty())
        throw ConfigError("config: missing field 'experiment'");
    const auto& defs = kind_defaults();
    const auto dit = defs.find(cfg.experiment);
    if (dit == defs.end())
        throw ConfigError("config: unknown experiment kind at 'experiment': " +
                          cfg.experiment);
    if (!j.contains("tuple"))
        throw ConfigError("config: missing field 'tuple'");
    const MapTuple parsed = tuple_from_json(j["tuple"].dump());
    (void)parsed;
    cfg.tuple_json = j["tuple"].dump();
    cfg.seed = seed_override ? *seed_override : j.value("seed", 0ULL);
    cfg.streams = streams_override ? *streams_override : j.value("streams", 1ULL);
    cfg.out_dir = !out_override.empty() ? out_override
                                        : j.value("out", std::string("out"));
    cfg.plots = j.value("plots", true);
    cfg.params = dit->second;
    if (j.contains("params")) {
        for (const auto& [key, value] : j["params"].items()) {
            if (!cfg.params.count(key))
                throw ConfigError("config: unknown field 'params." + key +
                                  "' for experiment " + cfg.experiment);
            cfg.params[key] = value.get<double>();
        }
    }
    return cfg;
}

// ---------------------------------------------------------------- writers

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct ArtifactSink {
    std::filesystem::path dir;
    std::vector<std::pair<std::string, std::string>> artifacts;

    void write(const std::string& name, const std::string& content) {
        std::ofstream f(dir / name, std::ios::binary);
        f << content;
        f.close();
        artifacts.push_back({name, sha256_hex(content)});
    }
};

std::string csv_join(const std::vector<std::string>& cells) {
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) row += ",";
        row += cells[i];
    }
    row += "\n";
    return row;
}

}  // namespace

void write_svg_lineplot(const std::string& path, const std::string& title,
                        const std::vector<double>& xs,
                        const std::vector<double>& ys, bool log_y) {
    std::vector<double> ty;
    for (double y : ys) ty.push_back(log_y ? std::log10(std::max(y, 1e-300)) : y);
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        xmin = std::min(xmin, xs[i]);
        xmax = std::max(xmax, xs[i]);
        ymin = std::min(ymin, ty[i]);
        ymax = std::max(ymax, ty[i]);
    }
    if (!(xmax > xmin)) xmax = xmin + 1;
    if (!(ymax > ymin)) ymax = ymin + 1;
    const double W = 640, H = 400, M = 50;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\">"
        << title << (log_y ? " (log10 y)" : "")
        << "</text>\n<polyline fill=\"none\" "
        << "stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double px = M + (xs[i] - xmin) / (xmax - xmin) * (W - 2 * M);
        const double py = H - M - (ty[i] - ymin) / (ymax - ymin) * (H - 2 * M);
        svg << px << "," << py << " ";
    }
    svg << "\"/>\n<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\""
        << W - M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n<line x1=\""
        << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
        << "\" stroke=\"black\"/>\n</svg>\n";
    std::ofstream f(path, std::ios::binary);
    f << svg.str();
}

// ------------------------------------------------------------ experiments

namespace {

void run_verify_expansion(const ExperimentConfig& cfg, const MapTuple& tuple,
                          ArtifactSink& sink) {
    const auto& P = cfg.params;
    const auto pts = point_grid(static_cast<std::size_t>(P.at("grid_G")));
    const auto dirs = direction_grid(static_cast<std::size_t>(P.at("grid_D")));
    json summary;
    std::string csv = "x,y,theta,mean,halfwidth\n";
    auto emit = [&](const ExpansionReport& rep) {
        for (const ExpansionEntry& e : rep.table)
            csv += csv_join({fmt17(e.point.x), fmt17(e.point.y),
                             fmt17(e.direction.theta), fmt17(e.mean),
                             fmt17(e.halfwidth)});
    };
    if (P.at("mc_samples") > 0) {
        const std::size_t n0 =
            std::max<std::size_t>(1, static_cast<std::size_t>(P.at("n0")));
        const ExpansionReport rep = eoa_monte_carlo(
            tuple, n0, pts, dirs, static_cast<std::size_t>(P.at("mc_samples")),
            P.at("confidence_delta"), cfg.seed, 0);
        emit(rep);
        summary["mode"] = "monte_carlo";
        summary["n0"] = rep.n0;
        summary["lambda_min"] = rep.lambda_min;
        summary["halfwidth"] = rep.confidence->second;
        summary["lipschitz"] = rep.lipschitz;
        summary["grid_mesh"] = rep.grid_mesh;
        summary["expanding"] = rep.lambda_min - rep.confidence->second > 0.0;
    } else if (P.at("n0") > 0) {
        const ExpansionReport rep =
            eoa_exact(tuple, static_cast<std::size_t>(P.at("n0")), pts, dirs,
                      static_cast<std::uint64_t>(P.at("cap")));
        emit(rep);
        summary["mode"] = "exact";
        summary["n0"] = rep.n0;
        summary["lambda_min"] = rep.lambda_min;
        summary["lipschitz"] = rep.lipschitz;
        summary["grid_mesh"] = rep.grid_mesh;
        summary["certified_lower_bound"] = rep.certified_lower_bound();
        summary["expanding"] = rep.certified_lower_bound() > 0.0;
    } else {
        const EscalationResult esc = eoa_escalate(
            tuple, static_cast<std::size_t>(P.at("n0_max")), pts, dirs,
            static_cast<std::uint64_t>(P.at("cap")));
        emit(esc.reports.back());
        summary["mode"] = "exact_escalation";
        summary["expanding"] = esc.expanding;
        summary["verdict_n0"] = esc.verdict_n0;
        json per;
        for (const ExpansionReport& rep : esc.reports)
            per.push_back({{"n0", rep.n0},
                           {"lambda_min", rep.lambda_min},
                           {"certified_lower_bound",
                            rep.certified_lower_bound()}});
        summary["per_n0"] = per;
        summary["lambda_min"] = esc.reports.back().lambda_min;
    }
    sink.write("expansion.csv", csv);
    sink.write("expansion.json", summary.dump(2) + "\n");
}

void run_tempered(const ExperimentConfig& cfg, const MapTuple& tuple,
                  ArtifactSink& sink) {
    const auto& P = cfg.params;
    const std::size_t n = static_cast<std::size_t>(P.at("n"));
    const double lambda = P.at("lambda"), eps = P.at("eps"), C0 = P.at("C0");
    std::string csv = cfg.streams > 1
                          ? "stream,n,C_fwd,C_rev,cushion,lognorm\n"
                          : "n,C_fwd,C_rev,cushion,lognorm\n";
    for (std::uint64_t s = 0; s < cfg.streams; ++s) {
        const WordStream ws(cfg.seed, s, static_cast<unsigned>(tuple.size()));
        const CocycleTrace tr =
            compose_word(tuple, ws, n, TorusPoint{P.at("x"), P.at("y")});
        const auto xs = tr.lognorm_increments();
        for (std::size_t k = 1; k <= n; ++k) {
            std::vector<double> prefix(xs.begin(), xs.begin() + k);
            std::vector<std::string> row;
            if (cfg.streams > 1) row.push_back(std::to_string(s));
            row.push_back(std::to_string(k));
            row.push_back(fmt17(tempered_constant(prefix, lambda, eps)));
            row.push_back(fmt17(tempered_constant(prefix, lambda, eps, true)));
            std::vector<double> lognorms(tr.lognorms.begin(),
                                         tr.lognorms.begin() + k + 1);
            row.push_back(fmt17(cushion_lognorms(lognorms, C0, lambda, eps)));
            row.push_back(fmt17(tr.lognorms[k]));
            csv += csv_join(row);
        }
    }
    sink.write("tempered.csv", csv);
}

void run_stable_dist(const ExperimentConfig& cfg, const MapTuple& tuple,
                     ArtifactSink& sink) {
    const auto& P = cfg.params;
    const DirectionHistogram h = stable_direction_distribution(
        tuple, TorusPoint{P.at("x"), P.at("y")},
        static_cast<std::size_t>(P.at("n")),
        static_cast<std::size_t>(P.at("words")), cfg.seed, 0,
        static_cast<std::size_t>(P.at("bins")));
    std::string csv = "bin,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b)
        csv += csv_join({std::to_string(b), std::to_string(h.counts[b])});
    sink.write("stabledist.csv", csv);
    std::string mp = "eps,hmax\n";
    for (std::size_t i = 0; i < h.mass_eps.size(); ++i)
        mp += csv_join({fmt17(h.mass_eps[i]), fmt17(h.mass_h[i])});
    sink.write("massprofile.csv", mp);
    json summary;
    summary["alpha_hat"] = h.alpha_fit.slope;
    summary["r2"] = h.alpha_fit.r2;
    summary["n_used"] = h.n_used;
    summary["degenerate_count"] = h.degenerate_count;
    sink.write("stabledist.json", summary.dump(2) + "\n");
    if (cfg.plots) {
        write_svg_lineplot((sink.dir / "massprofile.svg").string(),
                           "mass profile h(eps)", h.mass_eps, h.mass_h, true);
        sink.artifacts.push_back({"massprofile.svg", ""});
    }
}

void run_lyapunov(const ExperimentConfig& cfg, const MapTuple& tuple,
                  ArtifactSink& sink) {
    const auto& P = cfg.params;
    const std::size_t n = static_cast<std::size_t>(P.at("n"));
    const WordStream ws(cfg.seed, 0, static_cast<unsigned>(tuple.size()));
    const CocycleTrace tr =
        compose_word(tuple, ws, n, TorusPoint{P.at("x"), P.at("y")});
    const SingularDirections sd = singular_directions(tr.products[n].mat);
    const LyapMetricSeq seq =
        lyapunov_metric(tr.factors, sd.vmin_x, sd.vmin_y, sd.vmax_x, sd.vmax_y,
                        P.at("lambda"), P.at("lambda_prime"));
    std::string csv =
        "i,stable_norm,unstable_norm,stable_step_ratio,unstable_step_ratio,"
        "comparison_lower,comparison_upper\n";
    for (std::size_t i = 0; i <= n; ++i) {
        csv += csv_join(
            {std::to_string(i), fmt17(seq.stable_norm[i]),
             fmt17(seq.unstable_norm[i]),
             fmt17(i < n ? seq.stable_step_ratio[i] : std::nan("")),
             fmt17(i < n ? seq.unstable_step_ratio[i] : std::nan("")),
             fmt17(seq.comparison_lower[i]), fmt17(seq.comparison_upper[i])});
    }
    sink.write("lyapunov.csv", csv);
    json summary;
    summary["per_step_ok"] = seq.per_step_ok();
    summary["lambda_prime"] = seq.lambda_prime;
    sink.write("lyapunov.json", summary.dump(2) + "\n");
}

void run_graph_transform(const ExperimentConfig& cfg, const MapTuple&,
                         ArtifactSink& sink) {
    const auto& P = cfg.params;
    LocalMap2 F = LocalMap2::linear(P.at("sigma1"), P.at("sigma2"));
    const double kick = P.at("kick");
    F.f1 = [kick](double, double y) { return kick * std::sin(2.0 * M_PI * y); };
    F.f1x = [](double, double) { return 0.0; };
    F.f1y = [kick](double, double y) {
        return kick * 2.0 * M_PI * std::cos(2.0 * M_PI * y);
    };
    F.f2 = [kick](double x, double y) {
        return kick * std::sin(2.0 * M_PI * x) * y;
    };
    F.f2x = [kick](double x, double y) {
        return kick * 2.0 * M_PI * std::cos(2.0 * M_PI * x) * y;
    };
    F.f2y = [kick](double x, double) { return kick * std::sin(2.0 * M_PI * x); };
    F.eps1 = kick * 2.0 * M_PI;
    F.eps2 = kick * (1.0 + 2.0 * M_PI);
    F.f_c2 = kick * (4.0 * M_PI * M_PI + 4.0 * M_PI);

    CurveChart ch;
    ch.x0 = -P.at("halflen");
    ch.x1 = P.at("halflen");
    const std::size_t count = static_cast<std::size_t>(P.at("mesh_nodes"));
    ch.phi.resize(count);
    ch.logrho.assign(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        const double x = ch.x0 + (ch.x1 - ch.x0) * static_cast<double>(i) /
                                     static_cast<double>(count - 1);
        ch.phi[i] = P.at("phi_slope") * x;
    }
    std::string csv =
        "iter,len,c0,c1,c2,holder,len_bound,c0_bound,c1_bound,c2_bound,"
        "holder_bound,ok\n";
    bool all_ok = true;
    for (std::size_t it = 0; it < static_cast<std::size_t>(P.at("iters"));
         ++it) {
        auto [next, rep] = graph_transform_step(F, ch);
        all_ok = all_ok && rep.ok();
        csv += csv_join({std::to_string(it), fmt17(rep.len_out),
                         fmt17(rep.c0_out), fmt17(rep.c1_out),
                         fmt17(rep.c2_out), fmt17(rep.holder_out),
                         fmt17(rep.len_bound), fmt17(rep.c0_bound),
                         fmt17(rep.c1_bound), fmt17(rep.c2_bound),
                         fmt17(rep.holder_bound), rep.ok() ? "1" : "0"});
        if (next.length() > 1.0) {
            const double mid = 0.5 * (next.x0 + next.x1);
            CurveChart trimmed;
            trimmed.x0 = mid - 0.5;
            trimmed.x1 = mid + 0.5;
            trimmed.phi.resize(count);
            trimmed.logrho.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const double x =
                    trimmed.x0 +
                    static_cast<double>(i) / static_cast<double>(count - 1);
                trimmed.phi[i] = next.phi_at(x);
                trimmed.logrho[i] = next.logrho_at(x);
            }
            ch = trimmed;
        } else {
            ch = next;
        }
    }
    sink.write("graphtransform.csv", csv);
    json summary;
    summary["final_c1"] = ch.norm1();
    summary["all_bounds_ok"] = all_ok;
    sink.write("graphtransform.json", summary.dump(2) + "\n");
}

void run_fake_stable(const ExperimentConfig& cfg, const MapTuple& tuple,
                     ArtifactSink& sink) {
    const auto& P = cfg.params;
    LeafParams lp;
    lp.delta = P.at("delta");
    lp.mesh = P.at("mesh");
    json summary = json::array();
    for (std::uint64_t s = 0; s < cfg.streams; ++s) {
        const WordStream ws(cfg.seed, s, static_cast<unsigned>(tuple.size()));
        auto word = [&ws](std::uint64_t i) { return ws.symbol(i); };
        const FakeLeaf leaf =
            fake_stable_leaf(tuple, word, TorusPoint{P.at("x"), P.at("y")},
                             static_cast<std::size_t>(P.at("n")), lp);
        std::string csv = "s,x,y\n";
        for (std::size_t i = 0; i < leaf.nodes.size(); ++i)
            csv += csv_join({fmt17(leaf.arc_of(i)), fmt17(leaf.nodes[i].x),
                             fmt17(leaf.nodes[i].y)});
        sink.write("leaf_" + std::to_string(s) + ".csv", csv);
        summary.push_back({{"stream", s},
                           {"tangent_theta", leaf.tangent_at_base.theta},
                           {"truncated", leaf.truncated},
                           {"nodes", leaf.nodes.size()}});
    }
    sink.write("fakestable.json", summary.dump(2) + "\n");
}

void run_holonomy(const ExperimentConfig& cfg, const MapTuple& tuple,
                  ArtifactSink& sink) {
    const auto& P = cfg.params;
    const std::size_t n = static_cast<std::size_t>(P.at("n"));
    const WordStream ws(cfg.seed, 0, static_cast<unsigned>(tuple.size()));
    auto word = [&ws](std::uint64_t i) { return ws.symbol(i); };
    const TorusPoint x{P.at("x"), P.at("y")};
    const CocycleTrace tr = compose_word(tuple, word, n, x);
    const SplitEstimate split = singular_split(tr.products[n]);
    const double ta = split.theta_u.theta;
    const double off = P.at("offset");
    const CurveChart T1 = CurveChart::straight(x.x, x.y, ta, 0.015, 2e-4);
    const CurveChart T2 = CurveChart::straight(
        x.x + off * split.theta_s.cx(), x.y + off * split.theta_s.cy(), ta,
        0.015, 2e-4);
    LeafParams lp;
    lp.delta = P.at("delta");
    lp.mesh = P.at("mesh");
    std::vector<double> sources;
    const std::size_t count = static_cast<std::size_t>(P.at("sources"));
    for (std::size_t i = 0; i < count; ++i)
        sources.push_back(-0.004 + 0.008 * static_cast<double>(i) /
                                       std::max<std::size_t>(count - 1, 1));
    const HolonomyResult res =
        fake_holonomy(tuple, word, n, T1, T2, sources, lp);
    std::string csv = "source_s,image_s,jac_formula,jac_fd,n\n";
    for (const HolonomySample& smp : res.samples)
        csv += csv_join({fmt17(smp.source_s), fmt17(smp.image_s),
                         fmt17(smp.jac_formula), fmt17(smp.jac_fd),
                         std::to_string(res.time)});
    sink.write("holonomy.csv", csv);
}

void run_recovery(const ExperimentConfig& cfg, const MapTuple& tuple,
                  ArtifactSink& sink) {
    const auto& P = cfg.params;
    const StandardPair pair = StandardPair::ray(
        {P.at("x"), P.at("y")}, P.at("angle"), P.at("len"), 1e-3);
    BackwardsGoodParams bg;
    bg.C = P.at("C");
    bg.lambda = P.at("lambda");
    bg.eps = P.at("eps");
    bg.A = P.at("A");
    bg.eps_prime = P.at("eps_prime");
    bg.R = std::max(goodness(pair).R, 1.0);
    bg.horizon = static_cast<std::size_t>(P.at("horizon"));
    const std::size_t words = static_cast<std::size_t>(P.at("words"));
    const std::size_t x_index = pair.nodes.size() / 2;
    std::string csv = "word_stream,x_index,T,R_at_T\n";
    for (std::uint64_t w = 0; w < words; ++w) {
        const WordStream ws(cfg.seed, w, static_cast<unsigned>(tuple.size()));
        auto word = [&ws](std::uint64_t i) { return ws.symbol(i); };
        const auto T = backwards_good_time(tuple, word, pair, x_index, bg);
        double R_at = std::nan("");
        if (T) {
            const std::size_t radius_nodes = 25;
            const std::size_t lo =
                x_index > radius_nodes ? x_index - radius_nodes : 0;
            const std::size_t hi =
                std::min(pair.nodes.size() - 1, x_index + radius_nodes);
            StandardPair nb = StandardPair::make(
                {pair.nodes.begin() + lo, pair.nodes.begin() + hi + 1},
                {pair.logrho.begin() + lo, pair.logrho.begin() + hi + 1},
                pair.mesh_target);
            const StandardFamily pushed = push_pair(tuple, word, *T, nb);
            if (!pushed.pairs.empty() && pushed.pairs[0].nodes.size() >= 3)
                R_at = goodness(pushed.pairs[0]).R;
        }
        csv += csv_join({std::to_string(w), std::to_string(x_index),
                         T ? std::to_string(*T) : "inf", fmt17(R_at)});
    }
    sink.write("recovery.csv", csv);
}

void run_couple(const ExperimentConfig& cfg, const MapTuple& tuple,
                ArtifactSink& sink) {
    const auto& P = cfg.params;
    CouplingParams params;
    params.N0 = static_cast<std::size_t>(P.at("N0"));
    params.horizon = static_cast<std::size_t>(P.at("horizon"));
    params.a0 = P.at("a0");
    params.eta_hat = P.at("eta_hat");
    params.lambda = P.at("lambda");
    params.eps = P.at("eps");
    params.lambda_prime = P.at("lambda_prime");
    params.sigma = P.at("sigma");
    params.C = P.at("C");
    params.leaf.delta = P.at("leaf_delta");
    params.leaf.mesh = P.at("leaf_mesh");
    params.max_periods = static_cast<std::size_t>(P.at("max_periods"));

    const double len = P.at("len");
    const double gap = P.at("gap");
    const StandardPair a = StandardPair::ray({0.30, 0.40}, 0.05, len, 1e-3);
    StandardPair b = StandardPair::ray({0.30, 0.40 + gap}, 0.03, len, 1e-3);
    const double corr = std::log(a.mass / b.mass);
    for (double& lr : b.logrho) lr += corr;
    b.mass = a.mass;

    std::string tail_csv = "n,residual,coupled,stopped\n";
    std::string pairs_csv = "x,ux,y,uy,T\n";
    json summary = json::array();
    for (std::uint64_t s = 0; s < cfg.streams; ++s) {
        const RunResult run = run_coupling(a, b, tuple, cfg.seed, s, params);
        double coupled_acc = 0.0, stopped_acc = 0.0;
        for (const auto& row : run.record.steps) {
            coupled_acc += row.coupled;
            stopped_acc += row.stopped;
            tail_csv += csv_join({std::to_string(row.n), fmt17(row.residual),
                                  fmt17(coupled_acc), fmt17(stopped_acc)});
        }
        for (const auto& smp : run.record.samples)
            pairs_csv += csv_join({fmt17(smp.x.x), fmt17(smp.ux.x),
                                   fmt17(smp.x.y), fmt17(smp.ux.y),
                                   std::to_string(smp.T)});
        summary.push_back(
            {{"stream", s},
             {"coupled_mass", run.record.coupled_mass},
             {"initial_mass", run.record.initial_mass},
             {"per_attempt_fraction", run.per_attempt_coupled_fraction},
             {"periods", run.periods},
             {"horizon_exhausted", run.horizon_exhausted}});
    }
    sink.write("coupling_tail.csv", tail_csv);
    sink.write("coupled_pairs.csv", pairs_csv);
    sink.write("coupling.json", summary.dump(2) + "\n");
}

void run_mixing(const ExperimentConfig& cfg, const MapTuple& tuple,
                ArtifactSink& sink) {
    const auto& P = cfg.params;
    const Observable phi = Observable::cosine(
        static_cast<int>(P.at("phi_p")), static_cast<int>(P.at("phi_q")));
    const Observable psi = Observable::cosine(
        static_cast<int>(P.at("psi_p")), static_cast<int>(P.at("psi_q")));
    const std::size_t nmax = static_cast<std::size_t>(P.at("nmax"));
    const std::size_t N = static_cast<std::size_t>(P.at("lattice"));
    const std::size_t W = std::max<std::size_t>(
        cfg.streams, static_cast<std::size_t>(P.at("words")));
    const double floor = P.at("floor");

    const AnnealedResult runs =
        correlation_annealed(tuple, cfg.seed, 0, W, phi, psi, nmax, N);
    std::string corr = "word_stream,n,C_n\n";
    for (std::size_t w = 0; w < W; ++w)
        for (std::size_t n = 0; n <= nmax; ++n)
            corr += csv_join({std::to_string(w), std::to_string(n),
                              fmt17(runs.quenched[w][n])});
    for (std::size_t n = 0; n <= nmax; ++n)
        corr += csv_join(
            {"annealed", std::to_string(n), fmt17(runs.annealed[n])});
    sink.write("corr.csv", corr);

    std::string fits = "word_stream,eta_hat,C_hat,r2,window_lo,window_hi\n";
    std::vector<double> etas;
    for (std::size_t w = 0; w < W; ++w) {
        const MixingFit mf = rate_fit(runs.quenched[w], floor);
        fits += csv_join({std::to_string(w), fmt17(mf.eta_hat),
                          fmt17(mf.C_hat), fmt17(mf.r2),
                          std::to_string(mf.window.first),
                          std::to_string(mf.window.second)});
        if (!mf.degenerate && mf.eta_hat > 0) etas.push_back(mf.eta_hat);
    }
    sink.write("fits.csv", fits);

    json summary;
    summary["eta_median"] = etas.empty() ? 0.0 : median_of(etas);
    summary["nondegenerate_fits"] = etas.size();
    if (W >= 30) {
        const CwTail tail =
            c_omega_tail(tuple, phi, psi, nmax, W, cfg.seed, 0, N, floor);
        std::string cw = "C,survival\n";
        for (std::size_t i = 0; i < tail.C_grid.size(); ++i)
            cw += csv_join({fmt17(tail.C_grid[i]), fmt17(tail.survival[i])});
        sink.write("cw_tail.csv", cw);
        summary["cw_median"] = median_of(tail.per_word_C);
        summary["cw_loglog_slope"] = tail.loglog.slope;
        if (cfg.plots) {
            write_svg_lineplot((sink.dir / "cw_tail.svg").string(),
                               "C_omega survival", tail.C_grid, tail.survival,
                               true);
            sink.artifacts.push_back({"cw_tail.svg", ""});
        }
    }
    sink.write("mixing.json", summary.dump(2) + "\n");
    if (cfg.plots) {
        std::vector<double> xs, ys;
        for (std::size_t n = 0; n <= nmax; ++n) {
            xs.push_back(static_cast<double>(n));
            ys.push_back(std::fabs(runs.annealed[n]));
        }
        write_svg_lineplot((sink.dir / "corr.svg").string(),
                           "annealed |C_n|", xs, ys, true);
        sink.artifacts.push_back({"corr.svg", ""});
    }
}

}  // namespace

RunManifest run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const MapTuple tuple = tuple_from_json(cfg.tuple_json);

    ArtifactSink sink;
    sink.dir = cfg.out_dir;
    std::filesystem::create_directories(sink.dir);
    const std::string resolved = cfg.resolved_json();
    sink.write("resolved_config.json", resolved);

    if (cfg.experiment == "verify-expansion")
        run_verify_expansion(cfg, tuple, sink);
    else if (cfg.experiment == "tempered")
        run_tempered(cfg, tuple, sink);
    else if (cfg.experiment == "stable-dist")
        run_stable_dist(cfg, tuple, sink);
    else if (cfg.experiment == "lyapunov")
        run_lyapunov(cfg, tuple, sink);
    else if (cfg.experiment == "graph-transform")
        run_graph_transform(cfg, tuple, sink);
    else if (cfg.experiment == "fake-stable")
        run_fake_stable(cfg, tuple, sink);
    else if (cfg.experiment == "holonomy")
        run_holonomy(cfg, tuple, sink);
    else if (cfg.experiment == "recovery")
        run_recovery(cfg, tuple, sink);
    else if (cfg.experiment == "couple")
        run_couple(cfg, tuple, sink);
    else if (cfg.experiment == "mixing")
        run_mixing(cfg, tuple, sink);
    else
        throw ConfigError("config: unknown experiment kind at 'experiment': " +
                          cfg.experiment);

    RunManifest man;
    // the output location does not affect any computed value, so it stays
    // out of the config hash
    {
        nlohmann::json hashed = nlohmann::json::parse(resolved);
        hashed.erase("out");
        man.config_hash = sha256_hex(hashed.dump(2));
    }
    man.artifacts = sink.artifacts;
    man.version = kVersion;
    man.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream mf(std::filesystem::path(cfg.out_dir) / "run_manifest.json",
                     std::ios::binary);
    mf << man.to_json();
    return man;
}

std::string RunManifest::to_json() const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& [name, sha] : artifacts)
        arts.push_back({{"file", name}, {"sha256", sha}});
    j["artifacts"] = arts;
    j["wall_time_s"] = wall_time_s;
    j["version"] = version;
    return j.dump(2) + "\n";
}

std::string report_run(const std::string& run_dir) {
    namespace fs = std::filesystem;
    const fs::path dir(run_dir);
    if (!fs::exists(dir / "run_manifest.json"))
        throw ConfigError("report: no run_manifest.json in " + run_dir);
    std::ifstream mf(dir / "run_manifest.json");
    nlohmann::json man;
    try {
        mf >> man;
    } catch (const std::exception&) {
        throw ConfigError("report: corrupt manifest in " + run_dir);
    }
    std::ostringstream out;
    out << "run report: " << run_dir << "\n";
    out << "  version:     " << man.value("version", std::string("?")) << "\n";
    out << "  config hash: " << man.value("config_hash", std::string("?"))
        << "\n";
    out << "  wall time:   " << man.value("wall_time_s", 0.0) << " s\n";
    out << "  artifacts:\n";
    for (const auto& a : man["artifacts"])
        out << "    " << a.value("file", std::string("?")) << "  "
            << a.value("sha256", std::string("")).substr(0, 16) << "\n";
    for (const char* name :
         {"expansion.json", "stabledist.json", "lyapunov.json",
          "graphtransform.json", "fakestable.json", "coupling.json",
          "mixing.json"}) {
        if (!fs::exists(dir / name)) continue;
        std::ifstream sf(dir / name);
        nlohmann::json s;
        sf >> s;
        out << "  " << name << ": " << s.dump() << "\n";
    }
    return out.str();
}

}  // namespace rdslab
