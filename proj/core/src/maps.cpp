#include "rdslab/maps.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

namespace rdslab {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
}

double TrigPoly::eval(double u) const {
    double s = 0.0;
    for (std::size_t k = 0; k < cos_coeff.size(); ++k)
        s += cos_coeff[k] * std::cos(kTwoPi * static_cast<double>(k) * u);
    for (std::size_t k = 1; k < sin_coeff.size(); ++k)
        s += sin_coeff[k] * std::sin(kTwoPi * static_cast<double>(k) * u);
    return s;
}

double TrigPoly::deriv(double u) const {
    double s = 0.0;
    for (std::size_t k = 1; k < cos_coeff.size(); ++k)
        s -= cos_coeff[k] * kTwoPi * static_cast<double>(k) *
             std::sin(kTwoPi * static_cast<double>(k) * u);
    for (std::size_t k = 1; k < sin_coeff.size(); ++k)
        s += sin_coeff[k] * kTwoPi * static_cast<double>(k) *
             std::cos(kTwoPi * static_cast<double>(k) * u);
    return s;
}

double TrigPoly::deriv2(double u) const {
    double s = 0.0;
    for (std::size_t k = 1; k < cos_coeff.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k);
        s -= cos_coeff[k] * w * w * std::cos(w * u);
    }
    for (std::size_t k = 1; k < sin_coeff.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k);
        s -= sin_coeff[k] * w * w * std::sin(w * u);
    }
    return s;
}

double TrigPoly::sup_abs() const {
    double s = 0.0;
    for (double a : cos_coeff) s += std::fabs(a);
    for (double b : sin_coeff) s += std::fabs(b);
    return s;
}

double TrigPoly::sup_deriv() const {
    double s = 0.0;
    for (std::size_t k = 1; k < cos_coeff.size(); ++k)
        s += kTwoPi * static_cast<double>(k) * std::fabs(cos_coeff[k]);
    for (std::size_t k = 1; k < sin_coeff.size(); ++k)
        s += kTwoPi * static_cast<double>(k) * std::fabs(sin_coeff[k]);
    return s;
}

double TrigPoly::sup_deriv2() const {
    double s = 0.0;
    for (std::size_t k = 1; k < cos_coeff.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k);
        s += w * w * std::fabs(cos_coeff[k]);
    }
    for (std::size_t k = 1; k < sin_coeff.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k);
        s += w * w * std::fabs(sin_coeff[k]);
    }
    return s;
}

bool TrigPoly::zero() const { return sup_abs() == 0.0; }

std::pair<TorusPoint, Mat2> MapSpec::evaluate(const TorusPoint& p) const {
    TorusPoint q = p;
    Mat2 d = Mat2::identity();
    for (const MapStep& step : steps) {
        if (const auto* lin = std::get_if<LinearStep>(&step)) {
            const auto im = lin->m.apply(q.x, q.y);
            q = TorusPoint::reduced(im[0], im[1]);
            d = lin->m * d;
        } else if (const auto* hs = std::get_if<HShearStep>(&step)) {
            const double hp = hs->h.deriv(q.y);
            q = TorusPoint::reduced(q.x + hs->h.eval(q.y), q.y);
            d = Mat2{1.0, hp, 0.0, 1.0} * d;
        } else {
            const auto* vs = std::get_if<VShearStep>(&step);
            const double gp = vs->g.deriv(q.x);
            q = TorusPoint::reduced(q.x, q.y + vs->g.eval(q.x));
            d = Mat2{1.0, 0.0, gp, 1.0} * d;
        }
    }
    return {q, d};
}

TorusPoint MapSpec::apply(const TorusPoint& p) const { return evaluate(p).first; }

Mat2 MapSpec::differential(const TorusPoint& p) const { return evaluate(p).second; }

TorusPoint MapSpec::apply_inverse(const TorusPoint& p) const {
    TorusPoint q = p;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        if (const auto* lin = std::get_if<LinearStep>(&*it)) {
            const auto im = lin->m.inverse().apply(q.x, q.y);
            q = TorusPoint::reduced(im[0], im[1]);
        } else if (const auto* hs = std::get_if<HShearStep>(&*it)) {
            q = TorusPoint::reduced(q.x - hs->h.eval(q.y), q.y);
        } else {
            const auto* vs = std::get_if<VShearStep>(&*it);
            q = TorusPoint::reduced(q.x, q.y - vs->g.eval(q.x));
        }
    }
    return q;
}

Mat2 MapSpec::differential_inverse(const TorusPoint& p) const {
    TorusPoint q = p;
    Mat2 d = Mat2::identity();
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        if (const auto* lin = std::get_if<LinearStep>(&*it)) {
            const Mat2 inv = lin->m.inverse();
            const auto im = inv.apply(q.x, q.y);
            q = TorusPoint::reduced(im[0], im[1]);
            d = inv * d;
        } else if (const auto* hs = std::get_if<HShearStep>(&*it)) {
            q = TorusPoint::reduced(q.x - hs->h.eval(q.y), q.y);
            d = Mat2{1.0, -hs->h.deriv(q.y), 0.0, 1.0} * d;
        } else {
            const auto* vs = std::get_if<VShearStep>(&*it);
            q = TorusPoint::reduced(q.x, q.y - vs->g.eval(q.x));
            d = Mat2{1.0, 0.0, -vs->g.deriv(q.x), 1.0} * d;
        }
    }
    return d;
}

namespace {

// (C1, C2) sup bounds of one step; composition via
// ||f.g||_1 <= ||f||_1 ||g||_1  and  ||f.g||_2 <= ||f||_2 ||g||_1^2 + ||f||_1 ||g||_2.
std::pair<double, double> step_bounds(const MapStep& step) {
    if (const auto* lin = std::get_if<LinearStep>(&step))
        return {lin->m.norm(), 0.0};
    if (const auto* hs = std::get_if<HShearStep>(&step))
        return {1.0 + hs->h.sup_deriv(), hs->h.sup_deriv2()};
    const auto* vs = std::get_if<VShearStep>(&step);
    return {1.0 + vs->g.sup_deriv(), vs->g.sup_deriv2()};
}

}  // namespace

double MapSpec::c1_bound() const {
    double c1 = 1.0;
    for (const MapStep& s : steps) c1 *= step_bounds(s).first;
    return c1;
}

double MapSpec::c2_bound() const {
    double c1 = 1.0, c2 = 0.0;
    for (const MapStep& s : steps) {
        const auto [f1, f2] = step_bounds(s);
        c2 = f2 * c1 * c1 + f1 * c2;
        c1 = f1 * c1;
    }
    return c2;
}

MapTuple make_tuple(std::vector<MapSpec> maps) {
    if (maps.empty()) throw MapValidationError("make_tuple: empty tuple");
    for (const MapSpec& spec : maps) {
        for (const MapStep& step : spec.steps) {
            if (const auto* lin = std::get_if<LinearStep>(&step)) {
                if (std::fabs(lin->m.det() - 1.0) > 1e-12) {
                    std::ostringstream os;
                    os << "make_tuple: linear step determinant " << lin->m.det()
                       << " != 1";
                    throw MapValidationError(os.str());
                }
            }
        }
        // Composite determinant on a validation lattice.
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 8; ++j) {
                const TorusPoint p{(i + 0.5) / 8.0, (j + 0.5) / 8.0};
                if (std::fabs(spec.differential(p).det() - 1.0) > 1e-12)
                    throw MapValidationError(
                        "make_tuple: composite differential is not volume "
                        "preserving");
            }
        }
    }
    MapTuple t;
    t.maps = std::move(maps);
    t.c1_bound = 1.0;
    t.c2_bound = 0.0;
    for (const MapSpec& spec : t.maps) {
        t.c1_bound = std::max(t.c1_bound, spec.c1_bound());
        t.c2_bound = std::max(t.c2_bound, spec.c2_bound());
    }
    return t;
}

namespace {
MapSpec linear_spec(double a, double b, double c, double d) {
    MapSpec s;
    s.steps.push_back(LinearStep{Mat2{a, b, c, d}});
    return s;
}
}  // namespace

MapTuple make_single_cat() { return make_tuple({linear_spec(2, 1, 1, 1)}); }

MapTuple make_cat_pair() {
    return make_tuple({linear_spec(2, 1, 1, 1), linear_spec(1, 1, 1, 2)});
}

MapTuple make_cat_pair_shear(double K) {
    TrigPoly h;
    h.cos_coeff = {0.0, 0.0};
    h.sin_coeff = {0.0, K / kTwoPi};
    std::vector<MapSpec> maps;
    for (MapSpec spec : {linear_spec(2, 1, 1, 1), linear_spec(1, 1, 1, 2)}) {
        spec.steps.push_back(HShearStep{h});
        maps.push_back(std::move(spec));
    }
    return make_tuple(std::move(maps));
}

MapTuple make_rotations(const std::vector<double>& angles) {
    std::vector<MapSpec> maps;
    for (double a : angles)
        maps.push_back(
            linear_spec(std::cos(a), -std::sin(a), std::sin(a), std::cos(a)));
    return make_tuple(std::move(maps));
}

namespace {

using nlohmann::json;

TrigPoly trig_from_json(const json& j) {
    TrigPoly t;
    for (const auto& [key, value] : j.items()) {
        if (key == "cos")
            t.cos_coeff = value.get<std::vector<double>>();
        else if (key == "sin")
            t.sin_coeff = value.get<std::vector<double>>();
        else
            throw MapValidationError("tuple_from_json: unknown trig field '" +
                                     key + "'");
    }
    return t;
}

MapStep step_from_json(const json& j) {
    if (j.size() != 1)
        throw MapValidationError("tuple_from_json: step must have one field");
    if (j.contains("linear")) {
        const auto v = j["linear"].get<std::vector<double>>();
        if (v.size() != 4)
            throw MapValidationError("tuple_from_json: linear needs 4 entries");
        return LinearStep{Mat2{v[0], v[1], v[2], v[3]}};
    }
    if (j.contains("hshear")) return HShearStep{trig_from_json(j["hshear"])};
    if (j.contains("vshear")) return VShearStep{trig_from_json(j["vshear"])};
    throw MapValidationError("tuple_from_json: unknown step type");
}

json trig_to_json(const TrigPoly& t) {
    return json{{"cos", t.cos_coeff}, {"sin", t.sin_coeff}};
}

}  // namespace

MapTuple tuple_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (key != "family" && key != "params" && key != "custom")
            throw MapValidationError("tuple_from_json: unknown field '" + key +
                                     "'");
    }
    if (j.contains("custom")) {
        if (j.contains("family"))
            throw MapValidationError(
                "tuple_from_json: 'family' and 'custom' are exclusive");
        std::vector<MapSpec> maps;
        for (const auto& jm : j["custom"]) {
            if (!jm.contains("steps"))
                throw MapValidationError("tuple_from_json: map needs 'steps'");
            MapSpec spec;
            for (const auto& js : jm["steps"]) spec.steps.push_back(step_from_json(js));
            maps.push_back(std::move(spec));
        }
        return make_tuple(std::move(maps));
    }
    const std::string family = j.at("family").get<std::string>();
    const json params = j.value("params", json::object());
    if (family == "single_cat") return make_single_cat();
    if (family == "cat_pair") return make_cat_pair();
    if (family == "cat_pair_shear")
        return make_cat_pair_shear(params.at("K").get<double>());
    if (family == "rotations")
        return make_rotations(params.at("angles").get<std::vector<double>>());
    throw MapValidationError("tuple_from_json: unknown family '" + family + "'");
}

std::string tuple_to_json(const MapTuple& tuple) {
    json out;
    json maps = json::array();
    for (const MapSpec& spec : tuple.maps) {
        json steps = json::array();
        for (const MapStep& step : spec.steps) {
            if (const auto* lin = std::get_if<LinearStep>(&step))
                steps.push_back(
                    json{{"linear", {lin->m.a, lin->m.b, lin->m.c, lin->m.d}}});
            else if (const auto* hs = std::get_if<HShearStep>(&step))
                steps.push_back(json{{"hshear", trig_to_json(hs->h)}});
            else
                steps.push_back(json{
                    {"vshear", trig_to_json(std::get<VShearStep>(step).g)}});
        }
        maps.push_back(json{{"steps", steps}});
    }
    out["custom"] = maps;
    return out.dump(2);
}

}  // namespace rdslab
