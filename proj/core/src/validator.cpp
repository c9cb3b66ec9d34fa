#include "sscert/validator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sscert {

namespace {

// Whether input coordinate (bus, kind) carries a floor, i.e. is held at constant power.
bool floored(const CertificationProblem& pb, const FixedPointModel& model, std::size_t bus, InputKind kind) {
    for (std::size_t c = 0; c < model.inputs().size(); ++c) {
        const auto& in = model.inputs()[c];
        if (in.bus != bus || in.kind != kind) continue;
        if (pb.options.load_model == LoadModel::constant_power) return true;
        return pb.options.varied.empty() || pb.options.varied[c];
    }
    // coordinates that are not inputs are held at their base admittance
    return false;
}

}  // namespace

InjectionSchedule truth_schedule(const PowerNetwork& net, const FixedPointModel& model,
                                 const CertificationProblem& pb) {
    InjectionSchedule s = base_schedule(net);
    const auto& base = model.base();
    for (auto k : model.load_buses()) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double v2 = base.v[kk] * base.v[kk];
        if (!floored(pb, model, k, InputKind::g)) {
            s.p_admittance[kk] = s.p[kk] / v2;
            s.p[kk] = 0.0;
        }
        if (!floored(pb, model, k, InputKind::b)) {
            s.q_admittance[kk] = s.q[kk] / v2;
            s.q[kk] = 0.0;
        }
    }
    return s;
}

SoundnessReport monte_carlo_soundness(const PowerNetwork& net, const FixedPointModel& model,
                                      const CertificationProblem& pb, const OperationalLimits& limits,
                                      const Certificate& cert, int n, std::uint64_t seed) {
    SoundnessReport rep;
    if (n <= 0) return rep;
    const InjectionSchedule truth = truth_schedule(net, model, pb);
    const auto box = injection_box(model, cert.lu, pb);
    for (const auto& r : box) {
        if (r.empty()) throw std::invalid_argument("certificate has an empty injection range");
    }
    std::mt19937_64 rng(seed);
    auto uni = [&] { return unit_uniform(rng()); };
    auto note = [&](const std::string& s) {
        if (rep.notes.size() < 20) rep.notes.push_back(s);
    };

    for (int i = 0; i < n; ++i) {
        InjectionSchedule s = truth;
        for (const auto& r : box) {
            const auto kk = static_cast<Eigen::Index>(r.bus);
            const double up = uni();
            const double uq = uni();
            if (!r.p_held) s.p[kk] = r.p_min + up * (r.p_max - r.p_min);
            if (!r.q_held) s.q[kk] = r.q_min + uq * (r.q_max - r.q_min);
        }
        ++rep.samples;
        const auto res = solve_at_injection(net, s, model.base());
        std::ostringstream os;
        os << "sample " << i << ": ";
        if (!res.converged) {
            ++rep.failures;
            ++rep.nonconverged;
            note(os.str() + "no convergence (" + res.failure + ")");
            continue;
        }
        const auto feas = check_point_feasible(net, res.point, limits);
        bool bad = false;
        if (!feas.feasible) {
            ++rep.infeasible;
            bad = true;
            for (const auto& v : feas.violations) rep.worst_violation = std::max(rep.worst_violation, v.margin);
            const auto& v = feas.violations.front();
            os << to_string(v.kind) << " violation at element " << v.element << " by " << v.margin << "; ";
        }
        const Eigen::VectorXd ax = model.A() * model.state_deviation(res.point);
        double excess = 0.0;
        for (Eigen::Index r = 0; r < ax.size(); ++r) {
            const double lim = ax[r] >= 0.0 ? cert.lx.hi[r] : cert.lx.lo[r];
            excess = std::max(excess, std::abs(ax[r]) - lim);
        }
        if (excess > 1e-9) {
            ++rep.outside;
            bad = true;
            rep.worst_violation = std::max(rep.worst_violation, excess);
            os << "outside A(lx) by " << excess;
        }
        if (bad) {
            ++rep.failures;
            note(os.str());
        }
    }
    return rep;
}

CrossSection trace_cross_section(const PowerNetwork& net, const OperatingPoint& base,
                                 const InjectionSchedule& base_injection, const Plane& plane,
                                 const OperationalLimits& limits, int n_rays, const RayOptions& options) {
    if (n_rays < 1) throw std::invalid_argument("need at least one ray");
    if (plane.bus_a >= net.bus_count() || plane.bus_b >= net.bus_count() || plane.bus_a == plane.bus_b) {
        throw std::invalid_argument("invalid cross-section plane");
    }
    CrossSection sec;
    sec.plane = plane;
    const auto a = static_cast<Eigen::Index>(plane.bus_a);
    const auto b = static_cast<Eigen::Index>(plane.bus_b);
    sec.base = {base.p[a], base.p[b]};
    for (int i = 0; i < n_rays; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / n_rays;
        auto dir = InjectionSchedule::zeros(net.bus_count());
        dir.p[a] = std::cos(phi);
        dir.p[b] = std::sin(phi);
        // exact zeros keep axis-aligned rays clean
        if (std::abs(dir.p[a]) < 1e-15) dir.p[a] = 0.0;
        if (std::abs(dir.p[b]) < 1e-15) dir.p[b] = 0.0;
        const auto r = ray_boundary(net, base, base_injection, dir, limits, options);
        sec.rays.push_back({phi, r.t_max, 0.0});
        sec.true_polygon.push_back(sec.base + r.t_max * Eigen::Vector2d(dir.p[a], dir.p[b]));
    }
    return sec;
}

void attach_certificate(CrossSection& sec, const std::vector<InjectionRange>& box) {
    const InjectionRange* ra = nullptr;
    const InjectionRange* rb = nullptr;
    for (const auto& r : box) {
        if (r.bus == sec.plane.bus_a) ra = &r;
        if (r.bus == sec.plane.bus_b) rb = &r;
    }
    if (!ra || !rb) throw std::invalid_argument("plane buses are not in the injection box");
    sec.cert_rect = {ra->p_min, ra->p_max, rb->p_min, rb->p_max};
    for (auto& ray : sec.rays) {
        const double dx = std::cos(ray.angle);
        const double dy = std::sin(ray.angle);
        double r = std::numeric_limits<double>::infinity();
        auto axis = [&](double d, double lo, double hi, double c) {
            if (std::abs(d) < 1e-15) {
                if (c < lo || c > hi) r = 0.0;
                return;
            }
            const double bound = d > 0.0 ? hi : lo;
            r = std::min(r, std::max(0.0, (bound - c) / d));
        };
        axis(dx, sec.cert_rect[0], sec.cert_rect[1], sec.base.x());
        axis(dy, sec.cert_rect[2], sec.cert_rect[3], sec.base.y());
        ray.r_cert = r;
    }
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const auto& p = poly[i];
        const auto& q = poly[(i + 1) % poly.size()];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * std::abs(a);
}

std::vector<Eigen::Vector2d> clip_to_rect(const std::vector<Eigen::Vector2d>& polygon,
                                          const std::array<double, 4>& rect) {
    // Sutherland-Hodgman against the four half-planes
    std::vector<Eigen::Vector2d> out = polygon;
    for (int edge = 0; edge < 4 && !out.empty(); ++edge) {
        const int axis = edge / 2;
        const bool upper = edge % 2 == 1;
        const double bound = rect[static_cast<std::size_t>(edge)];
        auto inside = [&](const Eigen::Vector2d& p) { return upper ? p[axis] <= bound : p[axis] >= bound; };
        auto cross = [&](const Eigen::Vector2d& p, const Eigen::Vector2d& q) {
            const double t = (bound - p[axis]) / (q[axis] - p[axis]);
            return Eigen::Vector2d(p + t * (q - p));
        };
        std::vector<Eigen::Vector2d> in = std::move(out);
        out.clear();
        for (std::size_t i = 0; i < in.size(); ++i) {
            const auto& cur = in[i];
            const auto& prev = in[(i + in.size() - 1) % in.size()];
            if (inside(cur)) {
                if (!inside(prev)) out.push_back(cross(prev, cur));
                out.push_back(cur);
            } else if (inside(prev)) {
                out.push_back(cross(prev, cur));
            }
        }
    }
    return out;
}

double covering_ratio(const CrossSection& sec) {
    const double total = polygon_area(sec.true_polygon);
    if (!(total > 0.0)) throw std::invalid_argument("degenerate true polygon");
    const auto& r = sec.cert_rect;
    if (r[1] <= r[0] || r[3] <= r[2]) return 0.0;
    return polygon_area(clip_to_rect(sec.true_polygon, sec.cert_rect)) / total;
}

double tightness(const CrossSection& sec) {
    double t = 0.0;
    for (const auto& ray : sec.rays) {
        if (ray.r_true > 0.0) t = std::max(t, ray.r_cert / ray.r_true);
    }
    return t;
}

}  // namespace sscert
