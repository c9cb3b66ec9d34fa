#include "sscert/powerflow.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseLU>

namespace sscert {

Eigen::VectorXcd OperatingPoint::complex_voltage() const {
    Eigen::VectorXcd out(v.size());
    for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = std::polar(v[k], theta[k]);
    return out;
}

InjectionSchedule InjectionSchedule::zeros(std::size_t buses) {
    const auto n = static_cast<Eigen::Index>(buses);
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
            Eigen::VectorXd::Zero(n)};
}

InjectionSchedule base_schedule(const PowerNetwork& net) {
    auto s = InjectionSchedule::zeros(net.bus_count());
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        s.p[static_cast<Eigen::Index>(k)] = net.buses[k].p_spec;
        s.q[static_cast<Eigen::Index>(k)] = net.buses[k].q_spec;
    }
    return s;
}

OperatingPoint flat_start(const PowerNetwork& net) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    OperatingPoint pt{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n),
                      Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
    const double slack_angle = net.buses[net.slack_index()].theta_init;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& b = net.buses[static_cast<std::size_t>(k)];
        double vm = b.kind == BusKind::load ? b.v_init : b.v_set;
        if (!(vm > 0.0) || !std::isfinite(vm)) vm = 1.0;
        pt.v[k] = vm;
        pt.theta[k] = std::isfinite(b.theta_init) ? b.theta_init - slack_angle : 0.0;
        pt.rho[k] = std::log(vm);
    }
    return pt;
}

namespace {

struct Calc {
    Eigen::VectorXcd v;
    Eigen::VectorXcd current;
    Eigen::VectorXcd power;
};

Calc evaluate(const Eigen::SparseMatrix<Complex>& ybus, const Eigen::VectorXd& vm,
              const Eigen::VectorXd& va) {
    Calc c;
    c.v.resize(vm.size());
    for (Eigen::Index k = 0; k < vm.size(); ++k) c.v[k] = std::polar(vm[k], va[k]);
    c.current = ybus * c.v;
    c.power = c.v.cwiseProduct(c.current.conjugate());
    return c;
}

double spec_p(const InjectionSchedule& s, Eigen::Index k, double vm) {
    return s.p[k] + s.p_admittance[k] * vm * vm;
}
double spec_q(const InjectionSchedule& s, Eigen::Index k, double vm) {
    return s.q[k] + s.q_admittance[k] * vm * vm;
}

struct Indexing {
    std::vector<int> p_row;  // -1 for slack
    std::vector<int> q_row;  // -1 unless load
    int size = 0;
};

Indexing make_indexing(const PowerNetwork& net) {
    Indexing ix;
    ix.p_row.assign(net.bus_count(), -1);
    ix.q_row.assign(net.bus_count(), -1);
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        if (net.buses[k].kind != BusKind::slack) ix.p_row[k] = ix.size++;
    }
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        if (net.buses[k].kind == BusKind::load) ix.q_row[k] = ix.size++;
    }
    return ix;
}

Eigen::VectorXd mismatch_vector(const Indexing& ix, const Calc& c, const InjectionSchedule& s,
                                const Eigen::VectorXd& vm) {
    Eigen::VectorXd f(ix.size);
    for (std::size_t k = 0; k < ix.p_row.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (ix.p_row[k] >= 0) f[ix.p_row[k]] = c.power[kk].real() - spec_p(s, kk, vm[kk]);
        if (ix.q_row[k] >= 0) f[ix.q_row[k]] = c.power[kk].imag() - spec_q(s, kk, vm[kk]);
    }
    return f;
}

Eigen::SparseMatrix<double> jacobian(const Eigen::SparseMatrix<Complex>& ybus, const Indexing& ix,
                                     const Calc& c, const InjectionSchedule& s,
                                     const Eigen::VectorXd& vm) {
    const Complex j1(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(ybus.nonZeros()) * 4 + ix.p_row.size() * 4);
    auto put = [&](std::size_t i, std::size_t k, Complex ds_dtheta, Complex ds_dv) {
        // columns: theta uses the P row index of k, magnitude uses its Q row index
        const int ct = ix.p_row[k];
        const int cv = ix.q_row[k];
        if (ix.p_row[i] >= 0) {
            if (ct >= 0) trip.emplace_back(ix.p_row[i], ct, ds_dtheta.real());
            if (cv >= 0) trip.emplace_back(ix.p_row[i], cv, ds_dv.real());
        }
        if (ix.q_row[i] >= 0) {
            if (ct >= 0) trip.emplace_back(ix.q_row[i], ct, ds_dtheta.imag());
            if (cv >= 0) trip.emplace_back(ix.q_row[i], cv, ds_dv.imag());
        }
    };
    for (int k = 0; k < ybus.outerSize(); ++k) {
        const Complex vn = c.v[k] / vm[k];
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(ybus, k); it; ++it) {
            const auto i = static_cast<Eigen::Index>(it.row());
            const Complex yik = it.value();
            put(static_cast<std::size_t>(i), static_cast<std::size_t>(k),
                -j1 * c.v[i] * std::conj(yik * c.v[k]), c.v[i] * std::conj(yik * vn));
        }
    }
    for (std::size_t i = 0; i < ix.p_row.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Complex vn = c.v[ii] / vm[ii];
        Complex dv = std::conj(c.current[ii]) * vn;
        dv -= Complex(2.0 * s.p_admittance[ii] * vm[ii], 2.0 * s.q_admittance[ii] * vm[ii]);
        put(i, i, j1 * c.v[ii] * std::conj(c.current[ii]), dv);
    }
    Eigen::SparseMatrix<double> jac(ix.size, ix.size);
    jac.setFromTriplets(trip.begin(), trip.end());
    return jac;
}

}  // namespace

PowerFlowResult solve_power_flow(const PowerNetwork& net, const InjectionSchedule& schedule,
                                 const OperatingPoint& init, const SolverOptions& options) {
    const auto adm = build_edge_admittances(net);
    const auto ybus = bus_admittance_matrix(net, adm);
    const auto ix = make_indexing(net);

    PowerFlowResult res;
    Eigen::VectorXd vm = init.v;
    Eigen::VectorXd va = init.theta;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    bool pattern_ready = false;
    for (int iter = 0;; ++iter) {
        const auto calc = evaluate(ybus, vm, va);
        const auto f = mismatch_vector(ix, calc, schedule, vm);
        const double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
        res.mismatch_history.push_back(norm);
        if (!std::isfinite(norm)) {
            res.failure = "non-finite mismatch";
            break;
        }
        if (norm <= options.tolerance) {
            res.converged = true;
            res.iterations = iter;
            res.point.v = vm;
            res.point.theta = va;
            res.point.rho = vm.array().log();
            res.point.p = calc.power.real();
            res.point.q = calc.power.imag();
            return res;
        }
        if (iter >= options.max_iterations) {
            res.failure = "iteration limit reached";
            break;
        }
        const auto jac = jacobian(ybus, ix, calc, schedule, vm);
        if (!pattern_ready) {
            lu.analyzePattern(jac);
            pattern_ready = true;
        }
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) {
            res.failure = "singular Jacobian";
            break;
        }
        const Eigen::VectorXd dx = lu.solve(-f);
        for (std::size_t k = 0; k < ix.p_row.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            if (ix.p_row[k] >= 0) va[kk] += dx[ix.p_row[k]];
            if (ix.q_row[k] >= 0) vm[kk] += dx[ix.q_row[k]];
        }
        if ((vm.array() <= 0.05).any() || !vm.allFinite() || !va.allFinite()) {
            res.failure = "voltage collapse during iteration";
            res.iterations = iter + 1;
            break;
        }
    }
    res.iterations = static_cast<int>(res.mismatch_history.size()) - 1;
    return res;
}

OperatingPoint solve_base(const PowerNetwork& net, const std::optional<OperatingPoint>& init,
                          const SolverOptions& options) {
    auto res = solve_power_flow(net, base_schedule(net), init ? *init : flat_start(net), options);
    if (!res.converged) throw NoConvergence("base power flow: " + res.failure, res.mismatch_history);
    return res.point;
}

PowerFlowResult solve_at_injection(const PowerNetwork& net, const InjectionSchedule& u,
                                   const OperatingPoint& init, const SolverOptions& options) {
    return solve_power_flow(net, u, init, options);
}

double max_mismatch(const PowerNetwork& net, const InjectionSchedule& schedule,
                    const OperatingPoint& point) {
    const auto adm = build_edge_admittances(net);
    const auto ybus = bus_admittance_matrix(net, adm);
    const auto ix = make_indexing(net);
    const auto calc = evaluate(ybus, point.v, point.theta);
    const auto f = mismatch_vector(ix, calc, schedule, point.v);
    return f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
}

BranchFlows branch_flows(const PowerNetwork& net, const OperatingPoint& point) {
    const auto m = static_cast<Eigen::Index>(net.branch_count());
    BranchFlows out{Eigen::VectorXcd(m), Eigen::VectorXcd(m)};
    const auto v = point.complex_voltage();
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto& br = net.branches[static_cast<std::size_t>(e)];
        const auto ba = branch_admittance(br);
        const Complex vf = v[static_cast<Eigen::Index>(br.from)];
        const Complex vt = v[static_cast<Eigen::Index>(br.to)];
        out.from[e] = vf * std::conj(ba.yff * vf + ba.yft * vt);
        out.to[e] = vt * std::conj(ba.ytf * vf + ba.ytt * vt);
    }
    return out;
}

std::string_view to_string(ConstraintKind kind) {
    switch (kind) {
        case ConstraintKind::voltage: return "voltage";
        case ConstraintKind::angle_difference: return "angle-difference";
        case ConstraintKind::p_gen: return "p-gen";
        case ConstraintKind::q_gen: return "q-gen";
        case ConstraintKind::thermal: return "thermal";
    }
    return "unknown";
}

OperationalLimits band_limits(const PowerNetwork& net, const OperatingPoint& base, double band) {
    OperationalLimits lim;
    lim.v_min = base.v * (1.0 - band);
    lim.v_max = base.v * (1.0 + band);
    lim.s_max.reserve(net.branch_count());
    for (const auto& br : net.branches) lim.s_max.push_back(br.s_max);
    return lim;
}

std::vector<Violation> relax_base_violations(PowerNetwork& net, OperationalLimits& lim,
                                             const OperatingPoint& base) {
    const auto rep = check_point_feasible(net, base, lim);
    const double inf = std::numeric_limits<double>::infinity();
    for (const auto& v : rep.violations) {
        switch (v.kind) {
            case ConstraintKind::p_gen:
                net.buses[v.element].p_min = -inf;
                net.buses[v.element].p_max = inf;
                break;
            case ConstraintKind::q_gen:
                net.buses[v.element].q_min = -inf;
                net.buses[v.element].q_max = inf;
                break;
            case ConstraintKind::thermal:
                lim.s_max[v.element].reset();
                break;
            case ConstraintKind::angle_difference:
                net.branches[v.element].angle_min = -2 * std::numbers::pi;
                net.branches[v.element].angle_max = 2 * std::numbers::pi;
                break;
            case ConstraintKind::voltage:
                throw std::domain_error("base voltage outside its own band");
        }
    }
    return rep.violations;
}

FeasibilityReport check_point_feasible(const PowerNetwork& net, const OperatingPoint& pt,
                                       const OperationalLimits& lim) {
    FeasibilityReport rep;
    const double tol = lim.tolerance;
    auto upper = [&](ConstraintKind kind, std::size_t element, double value, double limit) {
        if (value > limit + tol) rep.violations.push_back({kind, element, value, limit, value - limit});
    };
    auto lower = [&](ConstraintKind kind, std::size_t element, double value, double limit) {
        if (value < limit - tol) rep.violations.push_back({kind, element, value, limit, limit - value});
    };
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const auto& b = net.buses[k];
        if (lim.voltage) {
            lower(ConstraintKind::voltage, k, pt.v[kk], lim.v_min[kk]);
            upper(ConstraintKind::voltage, k, pt.v[kk], lim.v_max[kk]);
        }
        if (b.kind != BusKind::generator) continue;
        if (lim.p_gen) {
            lower(ConstraintKind::p_gen, k, pt.p[kk], b.p_min);
            upper(ConstraintKind::p_gen, k, pt.p[kk], b.p_max);
        }
        if (lim.q_gen) {
            lower(ConstraintKind::q_gen, k, pt.q[kk], b.q_min);
            upper(ConstraintKind::q_gen, k, pt.q[kk], b.q_max);
        }
    }
    if (lim.angle_difference) {
        for (std::size_t e = 0; e < net.branch_count(); ++e) {
            const auto& br = net.branches[e];
            const double d = pt.theta[static_cast<Eigen::Index>(br.from)] -
                             pt.theta[static_cast<Eigen::Index>(br.to)];
            lower(ConstraintKind::angle_difference, e, d, br.angle_min);
            upper(ConstraintKind::angle_difference, e, d, br.angle_max);
        }
    }
    if (lim.thermal) {
        const auto flows = branch_flows(net, pt);
        for (std::size_t e = 0; e < net.branch_count(); ++e) {
            if (e >= lim.s_max.size() || !lim.s_max[e]) continue;
            const auto ee = static_cast<Eigen::Index>(e);
            const double s = std::max(std::abs(flows.from[ee]), std::abs(flows.to[ee]));
            upper(ConstraintKind::thermal, e, s, *lim.s_max[e]);
        }
    }
    rep.feasible = rep.violations.empty();
    return rep;
}

RayResult ray_boundary(const PowerNetwork& net, const OperatingPoint& base,
                       const InjectionSchedule& base_injection, const InjectionSchedule& direction,
                       const OperationalLimits& limits, const RayOptions& opt) {
    const double dnorm = direction.p.lpNorm<Eigen::Infinity>() + direction.q.lpNorm<Eigen::Infinity>() +
                         direction.p_admittance.lpNorm<Eigen::Infinity>() +
                         direction.q_admittance.lpNorm<Eigen::Infinity>();
    if (!(dnorm > 0.0)) throw std::invalid_argument("ray direction must be nonzero");
    if (!check_point_feasible(net, base, limits).feasible) {
        throw std::domain_error("base operating point violates the active limits");
    }

    RayResult out;
    out.boundary_point = base;
    OperatingPoint last_ok = base;

    auto at = [&](double t) {
        InjectionSchedule s = base_injection;
        s.p += t * direction.p;
        s.q += t * direction.q;
        s.p_admittance += t * direction.p_admittance;
        s.q_admittance += t * direction.q_admittance;
        return s;
    };
    auto probe = [&](double t) -> bool {
        const auto& init = opt.warm_start ? last_ok : base;
        auto res = solve_power_flow(net, at(t), init, opt.solver);
        const bool ok = res.converged && check_point_feasible(net, res.point, limits).feasible;
        out.history.push_back({t, ok});
        if (ok) {
            last_ok = res.point;
            out.boundary_point = res.point;
        }
        return ok;
    };

    double lo = 0.0;
    double hi = opt.initial_step;
    int doublings = 0;
    while (probe(hi)) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > opt.max_doublings) {
            out.t_max = lo;  // unbounded within the search horizon
            return out;
        }
    }
    // bisection; an all-infeasible first step falls back to an absolute tolerance
    const double abs_floor = opt.initial_step * 1e-9;
    while (hi - lo > std::max(opt.rel_tol * lo, abs_floor)) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    out.t_max = lo;
    return out;
}

}  // namespace sscert
