#include "sscert/serialize.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace sscert {

using nlohmann::json;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

double num_or(const json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

json vec(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }
Complex complex_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

BusKind bus_kind_from(const std::string& s) {
    if (s == "slack") return BusKind::slack;
    if (s == "generator") return BusKind::generator;
    if (s == "load") return BusKind::load;
    throw FormatError("unknown bus kind '" + s + "'");
}

InputKind input_kind_from(const std::string& s) {
    if (s == "g") return InputKind::g;
    if (s == "b") return InputKind::b;
    throw FormatError("unknown input kind '" + s + "'");
}

LoadModel load_model_from(const std::string& s) {
    if (s == to_string(LoadModel::constant_power)) return LoadModel::constant_power;
    if (s == to_string(LoadModel::constant_admittance)) return LoadModel::constant_admittance;
    throw FormatError("unknown load model '" + s + "'");
}

CertificateStatus status_from(const std::string& s) {
    for (auto st : {CertificateStatus::certified_nonlinear, CertificateStatus::certified_linear_relaxation,
                    CertificateStatus::zero}) {
        if (s == to_string(st)) return st;
    }
    throw FormatError("unknown certificate status '" + s + "'");
}

json bound_json(const BoundPair& b) { return {{"lo", vec(b.lo)}, {"hi", vec(b.hi)}}; }

BoundPair bound_from(const json& j, BoundRole role) {
    BoundPair b{vec_from(j.at("lo")), vec_from(j.at("hi")), role};
    if (b.lo.size() != b.hi.size()) throw FormatError("bound sides differ in length");
    return b;
}

json parse(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what());
    }
}

template <class F>
auto guarded(F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed document: ") + e.what());
    }
}

}  // namespace

std::string network_to_json(const PowerNetwork& net) {
    json buses = json::array();
    for (const auto& b : net.buses) {
        buses.push_back({{"id", b.id},
                         {"kind", std::string(to_string(b.kind))},
                         {"shunt", complex_json(b.shunt)},
                         {"v_min", num(b.v_min)},
                         {"v_max", num(b.v_max)},
                         {"p_min", num(b.p_min)},
                         {"p_max", num(b.p_max)},
                         {"q_min", num(b.q_min)},
                         {"q_max", num(b.q_max)},
                         {"p_spec", b.p_spec},
                         {"q_spec", b.q_spec},
                         {"v_set", b.v_set},
                         {"v_init", b.v_init},
                         {"theta_init", b.theta_init},
                         {"has_generator", b.has_generator}});
    }
    json branches = json::array();
    for (const auto& br : net.branches) {
        branches.push_back({{"from", br.from},
                            {"to", br.to},
                            {"y_series", complex_json(br.y_series)},
                            {"b_charging", br.b_charging},
                            {"tap", br.tap},
                            {"shift", br.shift},
                            {"s_max", br.s_max ? json(*br.s_max) : json(nullptr)},
                            {"angle_min", br.angle_min},
                            {"angle_max", br.angle_max}});
    }
    json j{{"base_mva", net.base_mva}, {"buses", buses}, {"branches", branches}};
    return j.dump(1);
}

PowerNetwork network_from_json(std::string_view text) {
    const json j = parse(text);
    PowerNetwork net = guarded([&] {
        PowerNetwork n;
        n.base_mva = j.at("base_mva").get<double>();
        for (const auto& b : j.at("buses")) {
            Bus bus;
            bus.id = b.at("id").get<int>();
            bus.kind = bus_kind_from(b.at("kind").get<std::string>());
            bus.shunt = complex_from(b.at("shunt"));
            bus.v_min = num_or(b.at("v_min"), 0.0);
            bus.v_max = num_or(b.at("v_max"), inf);
            bus.p_min = num_or(b.at("p_min"), -inf);
            bus.p_max = num_or(b.at("p_max"), inf);
            bus.q_min = num_or(b.at("q_min"), -inf);
            bus.q_max = num_or(b.at("q_max"), inf);
            bus.p_spec = b.at("p_spec").get<double>();
            bus.q_spec = b.at("q_spec").get<double>();
            bus.v_set = b.at("v_set").get<double>();
            bus.v_init = b.at("v_init").get<double>();
            bus.theta_init = b.at("theta_init").get<double>();
            bus.has_generator = b.at("has_generator").get<bool>();
            n.buses.push_back(bus);
        }
        for (const auto& b : j.at("branches")) {
            Branch br;
            br.from = b.at("from").get<std::size_t>();
            br.to = b.at("to").get<std::size_t>();
            br.y_series = complex_from(b.at("y_series"));
            br.b_charging = b.at("b_charging").get<double>();
            br.tap = b.at("tap").get<double>();
            br.shift = b.at("shift").get<double>();
            if (!b.at("s_max").is_null()) br.s_max = b.at("s_max").get<double>();
            br.angle_min = b.at("angle_min").get<double>();
            br.angle_max = b.at("angle_max").get<double>();
            n.branches.push_back(br);
        }
        return n;
    });
    net.validate();
    return net;
}

std::string certificate_to_json(const Certificate& c, const CertificateContext& ctx) {
    if (ctx.input_bus_ids.size() != ctx.input_kinds.size() ||
        static_cast<Eigen::Index>(ctx.input_kinds.size()) != c.lu.size()) {
        throw std::invalid_argument("certificate context does not match the input bound");
    }
    json inputs = json::array();
    for (std::size_t k = 0; k < ctx.input_kinds.size(); ++k) {
        json in{{"bus", ctx.input_bus_ids[k]}, {"kind", std::string(to_string(ctx.input_kinds[k]))}};
        if (!ctx.options.varied.empty()) in["varied"] = static_cast<bool>(ctx.options.varied[k]);
        inputs.push_back(in);
    }
    json obj{{"kind", std::string(to_string(c.objective.kind))}};
    if (c.objective.direction.size()) obj["direction"] = vec(c.objective.direction);
    if (c.objective.weights.size()) obj["weights"] = vec(c.objective.weights);
    if (c.objective.std_devs.size()) obj["std_devs"] = vec(c.objective.std_devs);

    json box = json::array();
    for (const auto& r : c.injection_box) {
        box.push_back({{"bus_index", r.bus},
                       {"p_min", r.p_min},
                       {"p_max", r.p_max},
                       {"q_min", r.q_min},
                       {"q_max", r.q_max},
                       {"p_held", r.p_held},
                       {"q_held", r.q_held}});
    }
    const auto& d = c.diagnostics;
    // wall-clock time stays out of the file so reruns are byte-identical
    json diag{{"probes", d.probes},
              {"iterations", d.iterations},
              {"spectral_radius", d.spectral_radius},
              {"theta_cap", d.theta_cap},
              {"value_linear", d.value_linear},
              {"self_map_slack", num(d.self_map_slack)},
              {"operational_slack", num(d.operational_slack)},
              {"binding", d.binding}};
    json j{{"schema", certificate_schema},
           {"version", certificate_schema_version},
           {"case", {{"name", ctx.case_name}, {"buses", ctx.buses}, {"branches", ctx.branches}}},
           {"status", std::string(to_string(c.status))},
           {"objective", obj},
           {"value", c.value},
           {"load_model", std::string(to_string(ctx.options.load_model))},
           {"band", ctx.options.band},
           {"theta_cap", ctx.options.theta_cap},
           {"inputs", inputs},
           {"lu", bound_json(c.lu)},
           {"lx", bound_json(c.lx)},
           {"injection_box", box},
           {"diagnostics", diag}};
    return j.dump(1);
}

CertificateFile certificate_from_json(std::string_view text) {
    const json j = parse(text);
    return guarded([&] {
        if (j.at("schema").get<std::string>() != certificate_schema) throw FormatError("not a certificate file");
        const int version = j.at("version").get<int>();
        if (version != certificate_schema_version) {
            throw FormatError("unsupported certificate version " + std::to_string(version));
        }
        CertificateFile f;
        auto& ctx = f.context;
        ctx.case_name = j.at("case").at("name").get<std::string>();
        ctx.buses = j.at("case").at("buses").get<std::size_t>();
        ctx.branches = j.at("case").at("branches").get<std::size_t>();
        ctx.options.load_model = load_model_from(j.at("load_model").get<std::string>());
        ctx.options.band = j.at("band").get<double>();
        ctx.options.theta_cap = j.at("theta_cap").get<double>();
        for (const auto& in : j.at("inputs")) {
            ctx.input_bus_ids.push_back(in.at("bus").get<int>());
            ctx.input_kinds.push_back(input_kind_from(in.at("kind").get<std::string>()));
            if (in.contains("varied")) ctx.options.varied.push_back(in.at("varied").get<bool>());
        }
        if (!ctx.options.varied.empty() && ctx.options.varied.size() != ctx.input_kinds.size()) {
            throw FormatError("varied flags given for some inputs only");
        }

        auto& c = f.certificate;
        c.status = status_from(j.at("status").get<std::string>());
        const auto& o = j.at("objective");
        c.objective.kind = objective_kind_from_string(o.at("kind").get<std::string>());
        if (o.contains("direction")) c.objective.direction = vec_from(o.at("direction"));
        if (o.contains("weights")) c.objective.weights = vec_from(o.at("weights"));
        if (o.contains("std_devs")) c.objective.std_devs = vec_from(o.at("std_devs"));
        c.value = j.at("value").get<double>();
        c.lu = bound_from(j.at("lu"), BoundRole::input);
        c.lx = bound_from(j.at("lx"), BoundRole::state);
        if (c.lu.size() != static_cast<Eigen::Index>(ctx.input_kinds.size())) {
            throw FormatError("input bound length does not match the input list");
        }
        for (const auto& r : j.at("injection_box")) {
            c.injection_box.push_back({r.at("bus_index").get<std::size_t>(), r.at("p_min").get<double>(),
                                       r.at("p_max").get<double>(), r.at("q_min").get<double>(),
                                       r.at("q_max").get<double>(), r.value("p_held", false),
                                       r.value("q_held", false)});
        }
        const auto& d = j.at("diagnostics");
        c.diagnostics.probes = d.at("probes").get<int>();
        c.diagnostics.iterations = d.at("iterations").get<int>();
        c.diagnostics.spectral_radius = d.at("spectral_radius").get<double>();
        c.diagnostics.theta_cap = d.at("theta_cap").get<double>();
        c.diagnostics.value_linear = d.at("value_linear").get<double>();
        c.diagnostics.self_map_slack = num_or(d.at("self_map_slack"), inf);
        c.diagnostics.operational_slack = num_or(d.at("operational_slack"), inf);
        c.diagnostics.binding = d.at("binding").get<std::vector<std::string>>();
        return f;
    });
}

std::string cross_section_to_json(const CrossSection& s, const PowerNetwork& net) {
    json poly = json::array();
    for (const auto& p : s.true_polygon) poly.push_back({p.x(), p.y()});
    json rays = json::array();
    for (const auto& r : s.rays) rays.push_back({{"angle", r.angle}, {"r_true", r.r_true}, {"r_cert", r.r_cert}});
    json j{{"plane",
            {{"bus_a", net.buses.at(s.plane.bus_a).id},
             {"bus_b", net.buses.at(s.plane.bus_b).id},
             {"coordinates", "active injection p.u."}}},
           {"base", {s.base.x(), s.base.y()}},
           {"true_polygon", poly},
           {"cert_rect",
            {{"x_min", s.cert_rect[0]}, {"x_max", s.cert_rect[1]}, {"y_min", s.cert_rect[2]}, {"y_max", s.cert_rect[3]}}},
           {"rays", rays}};
    return j.dump(1);
}

std::string cross_section_to_csv(const CrossSection& s) {
    std::ostringstream os;
    os << std::setprecision(17) << "angle,r_true,r_cert\n";
    for (const auto& r : s.rays) os << r.angle << ',' << r.r_true << ',' << r.r_cert << '\n';
    return os.str();
}

std::string validation_report_to_json(const ValidationReport& r) {
    const auto& s = r.soundness;
    const auto& b = r.brouwer;
    json j{{"reverified", r.reverified},
           {"reverify_note", r.reverify_note},
           {"soundness",
            {{"samples", s.samples},
             {"failures", s.failures},
             {"nonconverged", s.nonconverged},
             {"infeasible", s.infeasible},
             {"outside", s.outside},
             {"worst_violation", s.worst_violation},
             {"notes", s.notes}}},
           {"brouwer",
            {{"samples", b.samples},
             {"vertices", b.vertices},
             {"excursions", b.excursions},
             {"nonconverged", b.nonconverged},
             {"worst_residual", b.worst_residual},
             {"worst_excursion", b.worst_excursion}}}};
    if (r.has_section) {
        j["section"] = {{"covering_ratio", r.covering_ratio}, {"tightness", r.tightness}};
    }
    return j.dump(1);
}

}  // namespace sscert
