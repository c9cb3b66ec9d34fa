#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "sscert/serialize.hpp"

namespace sscert::app {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (case_path.empty()) throw std::invalid_argument("no case file given");
    if (!(band > 0.0) || band >= 1.0) throw std::invalid_argument("band must be in (0, 1)");
    if (preset != "paper-sv" && preset != "case-file") throw std::invalid_argument("unknown preset '" + preset + "'");
    if (load_model != "auto" && load_model != "constant-power" && load_model != "constant-admittance") {
        throw std::invalid_argument("unknown load model '" + load_model + "'");
    }
    objective_kind_from_string(objective);
    if (!plane.empty() && plane.size() != 2) throw std::invalid_argument("plane needs exactly two bus numbers");
    if (rays < 1) throw std::invalid_argument("rays must be positive");
    if (samples < 0 || brouwer_samples < 0) throw std::invalid_argument("sample counts must be nonnegative");
    if (candidate_loads < 2) throw std::invalid_argument("need at least two candidate loads");
}

namespace {

bool switch_on(LimitSwitch s, std::size_t buses) {
    if (s == LimitSwitch::automatic) return buses < 300;
    return s == LimitSwitch::on;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string case_name(const std::string& path) { return fs::path(path).stem().string(); }

std::string certificate_file(const RunConfig& c) {
    return c.certificate_path.empty() ? (fs::path(c.out_dir) / "certificate.json").string() : c.certificate_path;
}

std::string bus_label(const PowerNetwork& net, std::size_t k) { return std::to_string(net.buses[k].id); }

}  // namespace

Setup prepare(const RunConfig& c) {
    c.validate();
    PowerNetwork net = load_matpower(c.case_path);
    const OperatingPoint base = solve_base(net);
    OperationalLimits lim = band_limits(net, base, c.band);
    const auto flows = branch_flows(net, base);
    for (std::size_t e = 0; e < net.branch_count(); ++e) {
        const double doubled = 2.0 * std::max(std::abs(flows.from[static_cast<Eigen::Index>(e)]),
                                              std::abs(flows.to[static_cast<Eigen::Index>(e)]));
        // paper-sv replaces every rating, case-file only fills the missing ones
        if (c.preset == "paper-sv" || !lim.s_max[e]) lim.s_max[e] = doubled;
    }
    lim.q_gen = switch_on(c.reactive, net.bus_count());
    lim.thermal = switch_on(c.thermal, net.bus_count());
    auto relaxed = relax_base_violations(net, lim, base);

    ConstraintOptions co;
    co.reactive = lim.q_gen;
    co.thermal = lim.thermal;
    co.s_max = lim.s_max;
    co.v_min = lim.v_min;
    co.v_max = lim.v_max;
    FixedPointModel model(net, base, all_load_inputs(net), co);
    return Setup{std::move(net), base, std::move(lim), std::move(co), std::move(relaxed), std::move(model)};
}

std::pair<Objective, std::vector<bool>> plane_objective(const Setup& s, const std::string& kind,
                                                        const PlaneChoice& plane) {
    const auto& inputs = s.model.inputs();
    const auto n = static_cast<Eigen::Index>(inputs.size());
    std::vector<bool> varied(inputs.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    for (std::size_t c = 0; c < inputs.size(); ++c) {
        const bool on_plane = inputs[c].bus == plane.bus_a || inputs[c].bus == plane.bus_b;
        varied[c] = on_plane;
        if (on_plane && inputs[c].kind == InputKind::g) w[static_cast<Eigen::Index>(c)] = 1.0;
    }
    switch (objective_kind_from_string(kind)) {
        case ObjectiveKind::robustness: return {Objective::robustness(w), varied};
        // more consumption lowers the conductance coordinate
        case ObjectiveKind::loadability: return {Objective::loadability(-w), varied};
        case ObjectiveKind::chance: {
            // every coordinate moves, spread relative to its base admittance
            const auto& base = s.model.base();
            Eigen::VectorXd sd(n);
            for (std::size_t c = 0; c < inputs.size(); ++c) {
                const auto k = static_cast<Eigen::Index>(inputs[c].bus);
                const double a = (inputs[c].kind == InputKind::g ? base.p[k] : base.q[k]) / (base.v[k] * base.v[k]);
                sd[static_cast<Eigen::Index>(c)] = 0.05 * std::abs(a) + 1e-3;
            }
            return {Objective::chance(sd), std::vector<bool>(inputs.size(), true)};
        }
    }
    throw std::logic_error("unhandled objective");
}

Outcome certify(const Setup& s, const RunConfig& c) {
    const auto& net = s.network;
    std::vector<PlaneChoice> planes;
    if (!c.plane.empty()) {
        const std::size_t a = net.index_of(c.plane[0]);
        const std::size_t b = net.index_of(c.plane[1]);
        auto is_load = [&](std::size_t k) {
            return std::find(s.model.load_buses().begin(), s.model.load_buses().end(), k) != s.model.load_buses().end();
        };
        if (a == b || !is_load(a) || !is_load(b)) throw std::invalid_argument("plane buses must be two distinct load buses");
        planes.push_back({a, b});
    } else {
        // heaviest loads first
        std::vector<std::size_t> loads = s.model.load_buses();
        std::stable_sort(loads.begin(), loads.end(),
                         [&](std::size_t a, std::size_t b) { return s.base.p[static_cast<Eigen::Index>(a)] <
                                                                    s.base.p[static_cast<Eigen::Index>(b)]; });
        if (loads.size() < 2) throw std::invalid_argument("case has fewer than two load buses");
        loads.resize(std::min<std::size_t>(loads.size(), static_cast<std::size_t>(c.candidate_loads)));
        for (std::size_t i = 0; i < loads.size(); ++i) {
            for (std::size_t j = i + 1; j < loads.size(); ++j) planes.push_back({loads[i], loads[j]});
        }
    }
    std::vector<LoadModel> models;
    if (c.load_model != "constant-admittance") models.push_back(LoadModel::constant_power);
    if (c.load_model != "constant-power") models.push_back(LoadModel::constant_admittance);

    CertifierOptions opt;
    opt.lp_only = c.lp_only;
    opt.rel_tol = c.rel_tol;

    Outcome out;
    for (const auto& plane : planes) {
        auto [obj, varied] = plane_objective(s, c.objective, plane);
        for (auto lm : models) {
            ProblemOptions po;
            po.band = c.band;
            po.theta_cap = c.theta_cap;
            po.load_model = lm;
            po.varied = varied;
            CertificationProblem pb = build_problem(net, s.model, po);
            std::string tag = "plane " + bus_label(net, plane.bus_a) + "," + bus_label(net, plane.bus_b) + " " +
                              std::string(to_string(lm)) + ": ";
            out.plane = plane;
            out.objective = obj;
            out.problem = pb;
            try {
                Certificate cert = maximize(s.model, obj, pb, opt);
                std::ostringstream os;
                os << tag << to_string(cert.status) << " value " << cert.value;
                out.attempts.push_back(os.str());
                out.certificate = std::move(cert);
                return out;
            } catch (const ZeroCertificate& e) {
                out.attempts.push_back(tag + e.what());
                out.zero_reason = e.what();
            }
        }
    }
    return out;
}

CertificateContext context_for(const Setup& s, const RunConfig& c, const ProblemOptions& options) {
    CertificateContext ctx;
    ctx.case_name = case_name(c.case_path);
    ctx.buses = s.network.bus_count();
    ctx.branches = s.network.branch_count();
    for (const auto& in : s.model.inputs()) {
        ctx.input_bus_ids.push_back(s.network.buses[in.bus].id);
        ctx.input_kinds.push_back(in.kind);
    }
    ctx.options = options;
    return ctx;
}

CertificationProblem problem_for(const Setup& s, const CertificateFile& f) {
    const auto& ctx = f.context;
    const auto& inputs = s.model.inputs();
    if (ctx.buses != s.network.bus_count() || ctx.branches != s.network.branch_count() ||
        ctx.input_kinds.size() != inputs.size()) {
        throw std::invalid_argument("certificate was made for a different network");
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (s.network.buses[inputs[k].bus].id != ctx.input_bus_ids[k] || inputs[k].kind != ctx.input_kinds[k]) {
            throw std::invalid_argument("certificate input list does not match the network");
        }
    }
    if (f.certificate.lx.size() != static_cast<Eigen::Index>(s.model.row_count())) {
        throw std::invalid_argument("certificate state bound has the wrong length");
    }
    return build_problem(s.network, s.model, ctx.options);
}

ValidationReport validate(const Setup& s, const RunConfig& c, const CertificateFile& f,
                          std::optional<PlaneChoice> plane) {
    ValidationReport rep;
    const CertificationProblem pb = problem_for(s, f);
    const Certificate& cert = f.certificate;
    {
        const bool relaxed = cert.status != CertificateStatus::certified_nonlinear;
        // relaxed boxes are checked against the angle cap they were found with
        const bool cap_ok = !relaxed || cert.diagnostics.theta_cap > 0.0;
        const CertificationProblem check = relaxed && cap_ok ? with_angle_cap(pb, cert.diagnostics.theta_cap) : pb;
        const bool nonneg = cert.lu.nonnegative() && cert.lx.nonnegative() && cap_ok;
        const bool inside =
            nonneg && cert.lx.dominated_by(check.lx_max, 0.0) && pb.lu_floor.dominated_by(cert.lu, 1e-12);
        const auto sm = nonneg ? self_map_holds(s.model, cert.lx, cert.lu) : SlackReport{};
        const auto op = !nonneg   ? SlackReport{}
                        : relaxed ? operational_holds_linear(s.model, cert.lx, cert.lu, check.caps)
                                  : operational_holds(s.model, cert.lx, cert.lu);
        rep.reverified = nonneg && inside && sm.holds && op.holds;
        if (!nonneg) rep.reverify_note = cap_ok ? "negative bound entries" : "relaxed certificate without an angle cap";
        else if (!inside) rep.reverify_note = "boxes outside the state limits or below the input floor";
        else if (!sm.holds) rep.reverify_note = "self-mapping fails";
        else if (!op.holds) rep.reverify_note = "operational limits fail";
    }

    auto t0 = std::chrono::steady_clock::now();
    const auto box = injection_box(s.model, cert.lu, pb);
    if (std::any_of(box.begin(), box.end(), [](const InjectionRange& r) { return r.empty(); })) {
        // only possible when lu sits below the floor, which reverification already flags
        rep.soundness.notes.push_back("empty injection range; sampling skipped");
    } else {
        rep.soundness = monte_carlo_soundness(s.network, s.model, pb, s.limits, cert, c.samples, c.seed);
    }
    if (c.brouwer_samples > 0 && cert.lu.nonnegative()) {
        rep.brouwer = verify_brouwer(s.model, cert, c.brouwer_samples, c.seed + 1);
    }
    auto t1 = std::chrono::steady_clock::now();
    rep.seconds_soundness = std::chrono::duration<double>(t1 - t0).count();

    if (plane) {
        const InjectionSchedule truth = truth_schedule(s.network, s.model, pb);
        CrossSection sec = trace_cross_section(s.network, s.base, truth, {plane->bus_a, plane->bus_b}, s.limits, c.rays);
        attach_certificate(sec, injection_box(s.model, cert.lu, pb));
        // covering needs a true polygon; fewer than three rays give none
        rep.has_section = sec.true_polygon.size() >= 3;
        if (rep.has_section) rep.covering_ratio = covering_ratio(sec);
        rep.tightness = tightness(sec);
        rep.seconds_section = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    }
    return rep;
}

namespace {

// The plane of a certificate whose varied inputs sit on exactly two buses.
std::optional<PlaneChoice> plane_of(const Setup& s, const CertificateFile& f) {
    const auto& varied = f.context.options.varied;
    if (varied.empty()) return std::nullopt;
    std::vector<std::size_t> buses;
    for (std::size_t k = 0; k < varied.size(); ++k) {
        if (!varied[k]) continue;
        const std::size_t b = s.model.inputs()[k].bus;
        if (std::find(buses.begin(), buses.end(), b) == buses.end()) buses.push_back(b);
    }
    if (buses.size() != 2) return std::nullopt;
    return PlaneChoice{buses[0], buses[1]};
}

void log_setup(const Setup& s) {
    for (const auto& v : s.relaxed) {
        std::cerr << "note: base point violates " << to_string(v.kind) << " limit of element " << v.element
                  << " by " << v.margin << "; limit dropped\n";
    }
}

}  // namespace

int cmd_certify(const RunConfig& c) {
    const Setup s = prepare(c);
    log_setup(s);
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome out = certify(s, c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& a : out.attempts) std::cerr << "  " << a << "\n";
    if (!out.certificate) {
        std::cerr << "zero certificate: " << out.zero_reason << "\n";
        return zero_certificate;
    }
    const auto& cert = *out.certificate;
    const fs::path path = certificate_file(c);
    write_file(path, certificate_to_json(cert, context_for(s, c, out.problem.options)));
    std::cout << to_string(cert.status) << " " << to_string(cert.objective.kind) << " " << cert.value << " (relaxed "
              << cert.diagnostics.value_linear << ") in " << secs << " s -> " << path.string() << "\n";
    return ok;
}

int cmd_validate(const RunConfig& c) {
    const Setup s = prepare(c);
    const CertificateFile f = certificate_from_json(read_file(certificate_file(c)));
    const ValidationReport rep = validate(s, c, f, plane_of(s, f));
    const fs::path path = fs::path(c.out_dir) / "validation.json";
    write_file(path, validation_report_to_json(rep));
    const auto& sr = rep.soundness;
    std::cout << "samples " << sr.samples << " failures " << sr.failures << " (nonconverged " << sr.nonconverged
              << ", infeasible " << sr.infeasible << ", outside " << sr.outside << ")"
              << " brouwer excursions " << rep.brouwer.excursions << (rep.reverified ? "" : " NOT REVERIFIED");
    if (rep.has_section) std::cout << " covering " << rep.covering_ratio << " tightness " << rep.tightness;
    std::cout << " -> " << path.string() << "\n";
    for (const auto& n : sr.notes) std::cerr << "  " << n << "\n";
    if (!rep.reverified) std::cerr << "  certificate does not verify: " << rep.reverify_note << "\n";
    const bool pass = sr.failures == 0 && rep.reverified && rep.brouwer.excursions == 0;
    return pass ? ok : validation_failure;
}

int cmd_section(const RunConfig& c) {
    const Setup s = prepare(c);
    if (c.plane.empty()) throw std::invalid_argument("section needs --plane A,B");
    const PlaneChoice plane{s.network.index_of(c.plane[0]), s.network.index_of(c.plane[1])};
    if (plane.bus_a == plane.bus_b) throw std::invalid_argument("plane buses must differ");

    // certificate from file when one is given, otherwise certify this plane
    CertificationProblem pb;
    std::optional<Certificate> cert;
    if (!c.certificate_path.empty()) {
        CertificateFile f = certificate_from_json(read_file(c.certificate_path));
        pb = problem_for(s, f);
        cert = std::move(f.certificate);
    } else {
        Outcome out = certify(s, c);
        pb = out.problem;
        cert = std::move(out.certificate);
        if (!cert) std::cerr << "zero certificate: " << out.zero_reason << "\n";
    }
    const InjectionSchedule truth = truth_schedule(s.network, s.model, pb);
    CrossSection sec = trace_cross_section(s.network, s.base, truth, {plane.bus_a, plane.bus_b}, s.limits, c.rays);
    if (cert) {
        attach_certificate(sec, injection_box(s.model, cert->lu, pb));
    } else {
        // a zero certificate is the base point alone
        sec.cert_rect = {sec.base.x(), sec.base.x(), sec.base.y(), sec.base.y()};
    }
    const fs::path dir(c.out_dir);
    const std::string stem = "section_" + std::to_string(c.plane[0]) + "_" + std::to_string(c.plane[1]);
    write_file(dir / (stem + ".json"), cross_section_to_json(sec, s.network));
    write_file(dir / (stem + ".csv"), cross_section_to_csv(sec));
    std::cout << sec.rays.size() << " rays";
    if (sec.true_polygon.size() >= 3) std::cout << ", covering " << covering_ratio(sec);
    std::cout << " tightness " << tightness(sec) << " -> " << (dir / (stem + ".csv")).string() << "\n";
    return ok;
}

}  // namespace sscert::app
