#include "sscert/certifier.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace sscert {

std::string_view to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::loadability: return "loadability";
        case ObjectiveKind::robustness: return "robustness";
        case ObjectiveKind::chance: return "chance";
    }
    return "unknown";
}

ObjectiveKind objective_kind_from_string(std::string_view s) {
    if (s == "loadability") return ObjectiveKind::loadability;
    if (s == "robustness") return ObjectiveKind::robustness;
    if (s == "chance") return ObjectiveKind::chance;
    throw std::invalid_argument("unknown objective '" + std::string(s) + "'");
}

std::string_view to_string(LoadModel m) {
    return m == LoadModel::constant_power ? "constant-power" : "constant-admittance";
}

std::string_view to_string(CertificateStatus s) {
    switch (s) {
        case CertificateStatus::certified_nonlinear: return "certified-nonlinear";
        case CertificateStatus::certified_linear_relaxation: return "certified-linear-relaxation";
        case CertificateStatus::zero: return "zero-certificate";
    }
    return "unknown";
}

Objective Objective::loadability(Eigen::VectorXd direction) {
    Objective o;
    o.kind = ObjectiveKind::loadability;
    o.direction = std::move(direction);
    return o;
}

Objective Objective::robustness(Eigen::VectorXd weights) {
    Objective o;
    o.kind = ObjectiveKind::robustness;
    o.weights = std::move(weights);
    return o;
}

Objective Objective::chance(Eigen::VectorXd std_devs) {
    Objective o;
    o.kind = ObjectiveKind::chance;
    o.std_devs = std::move(std_devs);
    return o;
}

void Objective::validate(std::size_t inputs) const {
    const auto n = static_cast<Eigen::Index>(inputs);
    switch (kind) {
        case ObjectiveKind::loadability:
            if (direction.size() != n) throw std::invalid_argument("direction size does not match inputs");
            if (direction.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("zero stress direction");
            break;
        case ObjectiveKind::robustness:
            if (weights.size() != n) throw std::invalid_argument("weights size does not match inputs");
            if ((weights.array() < 0.0).any() || weights.maxCoeff() <= 0.0) {
                throw std::invalid_argument("robustness weights must be nonnegative and not all zero");
            }
            break;
        case ObjectiveKind::chance:
            if (std_devs.size() != n) throw std::invalid_argument("std-dev size does not match inputs");
            if ((std_devs.array() <= 0.0).any()) throw std::invalid_argument("std-devs must be positive");
            break;
    }
}

double chance_score(const BoundPair& lu, const Eigen::VectorXd& s) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        total += std::erf(lu.hi[k] / (std::numbers::sqrt2 * s[k])) - std::erf(-lu.lo[k] / (std::numbers::sqrt2 * s[k]));
    }
    return 0.5 * total;
}

double unit_uniform(std::uint64_t draw) { return static_cast<double>(draw >> 11) * 0x1.0p-53; }

CertificationProblem build_problem(const PowerNetwork& net, const FixedPointModel& model,
                                   const ProblemOptions& options) {
    if (!(options.band > 0.0) || options.band >= 1.0) throw std::invalid_argument("voltage band must be in (0, 1)");
    if (!(options.theta_cap > 0.0) || options.theta_cap > std::numbers::pi / 2) {
        throw std::invalid_argument("angle cap must be in (0, pi/2]");
    }
    const auto m = static_cast<Eigen::Index>(model.edge_count());
    const auto nl = static_cast<Eigen::Index>(model.load_count());
    const double r_up = std::log1p(options.band);
    const double r_dn = -std::log1p(-options.band);
    const auto& base = model.base();

    CertificationProblem pb;
    pb.options = options;
    pb.lx_max = BoundPair::zeros(2 * m + nl, BoundRole::state);
    pb.caps.theta.resize(m);
    pb.caps.rho.resize(m);
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto& ed = model.edges()[static_cast<std::size_t>(e)];
        const auto& br = net.branches[static_cast<std::size_t>(e)];
        const double th = ed.theta_base;
        pb.lx_max.hi[e] = std::clamp(br.angle_max - th, 0.0, options.theta_cap);
        pb.lx_max.lo[e] = std::clamp(th - br.angle_min, 0.0, options.theta_cap);
        const bool f_free = model.rho_state(ed.from) >= 0;
        const bool t_free = model.rho_state(ed.to) >= 0;
        pb.lx_max.hi[m + e] = (f_free ? r_up : 0.0) + (t_free ? r_dn : 0.0);
        pb.lx_max.lo[m + e] = (f_free ? r_dn : 0.0) + (t_free ? r_up : 0.0);
        pb.caps.theta[e] = std::max(options.theta_cap, 1e-9);
        const double rc = std::max(pb.lx_max.hi[m + e], pb.lx_max.lo[m + e]);
        pb.caps.rho[e] = rc > 0.0 ? rc : r_up + r_dn;
    }
    for (Eigen::Index l = 0; l < nl; ++l) {
        pb.lx_max.hi[2 * m + l] = r_up;
        pb.lx_max.lo[2 * m + l] = r_dn;
    }
    pb.caps.validate();

    pb.v_min = base.v * (1.0 - options.band);
    pb.v_max = base.v * (1.0 + options.band);

    const auto ni = static_cast<Eigen::Index>(model.input_count());
    pb.lu_floor = BoundPair::zeros(ni, BoundRole::input);
    if (!options.varied.empty() && options.varied.size() != model.input_count()) {
        throw std::invalid_argument("varied-input mask size does not match the model");
    }
    {
        for (Eigen::Index c = 0; c < ni; ++c) {
            const bool varied = options.varied.empty() || options.varied[static_cast<std::size_t>(c)];
            if (options.load_model == LoadModel::constant_admittance && !varied) continue;
            const auto& in = model.inputs()[static_cast<std::size_t>(c)];
            const auto k = static_cast<Eigen::Index>(in.bus);
            const double s = in.kind == InputKind::g ? base.p[k] : -base.q[k];
            const double a0 = s / (base.v[k] * base.v[k]);
            const double a1 = s / (pb.v_max[k] * pb.v_max[k]);
            const double a2 = s / (pb.v_min[k] * pb.v_min[k]);
            pb.lu_floor.hi[c] = std::max(0.0, std::max(a1, a2) - a0);
            pb.lu_floor.lo[c] = std::max(0.0, a0 - std::min(a1, a2));
        }
    }
    return pb;
}

double SlackReport::min_slack() const {
    double s = std::numeric_limits<double>::infinity();
    if (slack_hi.size()) s = std::min(s, slack_hi.minCoeff());
    if (slack_lo.size()) s = std::min(s, slack_lo.minCoeff());
    return s;
}

SlackReport self_map_holds(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu) {
    const BoundPair s = sigma(lu, model);
    const BoundPair t = tau(lx, model);
    SlackReport r;
    r.slack_hi = lx.hi - s.hi - t.hi;
    r.slack_lo = lx.lo - s.lo - t.lo;
    r.holds = r.min_slack() >= 0.0;
    return r;
}

namespace {

SlackReport operational_from(const FixedPointModel& model, const BoundPair& d2, const BoundPair& lu) {
    SlackReport r;
    if (model.constraint_count() == 0) {
        r.holds = true;
        return r;
    }
    const BoundPair du = split_product(model.D(), lu.hi, lu.lo, BoundRole::map_output);
    const BoundPair ef = split_product(model.E(), d2.hi, d2.lo, BoundRole::map_output);
    r.slack_hi = -(du.hi + ef.hi + model.hstar());
    r.holds = r.slack_hi.minCoeff() >= 0.0;
    return r;
}

}  // namespace

SlackReport operational_holds(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu) {
    return operational_from(model, delta2_bounds(lx, model.edge_count()), lu);
}

SlackReport operational_holds_linear(const FixedPointModel& model, const BoundPair& lx, const BoundPair& lu,
                                     const RelaxationCaps& caps) {
    return operational_from(model, linear_bounds(lx, model.edge_count(), caps), lu);
}

namespace {

std::string describe_state_row(const FixedPointModel& model, Eigen::Index row, bool upper) {
    const auto m = static_cast<Eigen::Index>(model.edge_count());
    std::ostringstream os;
    if (row < m) {
        os << "angle difference of branch " << row;
    } else if (row < 2 * m) {
        os << "log-voltage difference of branch " << row - m;
    } else {
        os << "voltage of bus index " << model.load_buses()[static_cast<std::size_t>(row - 2 * m)];
    }
    os << (upper ? " (upper)" : " (lower)");
    return os.str();
}

std::string describe_constraint_row(const FixedPointModel& model, Eigen::Index row) {
    const auto& r = model.constraint_rows()[static_cast<std::size_t>(row)];
    std::ostringstream os;
    os << to_string(r.kind) << (r.kind == ConstraintRowKind::reactive_gen ? " at bus index " : " on branch ")
       << r.element << (r.sign > 0 ? " (upper)" : " (lower)");
    return os.str();
}

// First row where a exceeds b, or -1.
Eigen::Index first_exceeding(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (!(a[i] <= b[i])) return i;
    }
    return -1;
}

BoundPair map_tau(const FixedPointModel& model, const BoundPair& lx, const CertificationProblem& pb,
                  BoundMode mode) {
    return mode == BoundMode::exact ? tau(lx, model) : tau_linear(lx, model, pb.caps);
}

}  // namespace

FixedUResult certify_fixed_u(const FixedPointModel& model, const BoundPair& lu, const CertificationProblem& pb,
                             BoundMode mode, const CertifierOptions& opt) {
    if (!lu.nonnegative()) throw std::invalid_argument("input bound must be nonnegative");
    if (lu.size() != static_cast<Eigen::Index>(model.input_count())) {
        throw std::invalid_argument("input bound size does not match the model");
    }
    FixedUResult res;
    auto fail_state = [&](const BoundPair& l) {
        Eigen::Index r = first_exceeding(l.hi, pb.lx_max.hi);
        bool upper = true;
        if (r < 0) {
            r = first_exceeding(l.lo, pb.lx_max.lo);
            upper = false;
        }
        res.failed_row = static_cast<int>(r);
        res.reason = "state limit: " + describe_state_row(model, r, upper);
        return res;
    };

    const BoundPair s = sigma(lu, model);
    BoundPair l{s.lo, s.hi, BoundRole::state};
    if (!l.dominated_by(pb.lx_max)) return fail_state(l);

    const int cap = mode == BoundMode::exact ? opt.max_iterations : opt.max_iterations_linear;
    bool converged = false;
    double last_step = 0.0;
    double prev_step = 0.0;
    BoundPair lc;
    for (int k = 1; k <= cap; ++k) {
        const BoundPair t = map_tau(model, l, pb, mode);
        BoundPair next{s.lo + t.lo, s.hi + t.hi, BoundRole::state};
        res.iterations = k;
        const double scale = 1e-12 * (1.0 + std::max(l.hi.cwiseAbs().maxCoeff(), l.lo.cwiseAbs().maxCoeff()));
        if (!l.dominated_by(next, scale)) throw std::logic_error("monotone bound iteration decreased");
        if (!next.dominated_by(pb.lx_max)) return fail_state(next);
        const Eigen::VectorXd d_lo = next.lo - l.lo;
        const Eigen::VectorXd d_hi = next.hi - l.hi;
        const double diff = std::max(d_lo.cwiseAbs().maxCoeff(), d_hi.cwiseAbs().maxCoeff());
        l = std::move(next);
        prev_step = last_step;
        last_step = diff;
        if (diff <= opt.convergence_tol) {
            converged = true;
            break;
        }
        // Any l with l >= sigma + tau(l) certifies; try a geometric extrapolation
        // of the tail instead of iterating to the least fixed point.
        const double rate = prev_step > 0.0 ? diff / prev_step : 1.0;
        if (k >= 3 && k % 2 == 1 && rate < 0.98) {
            const double ext = 2.0 * rate / (1.0 - rate) + 1e-3;
            BoundPair cand{l.lo + ext * d_lo, l.hi + ext * d_hi, BoundRole::state};
            cand.lo = cand.lo.cwiseMin(pb.lx_max.lo);
            cand.hi = cand.hi.cwiseMin(pb.lx_max.hi);
            const BoundPair tc = map_tau(model, cand, pb, mode);
            // rows that settled at rounding level only hold up to summation noise;
            // the padded candidate goes through the exact check below
            const double noise = -1e-12 * (1.0 + std::max(cand.hi.maxCoeff(), cand.lo.maxCoeff()));
            if ((cand.lo - s.lo - tc.lo).minCoeff() >= noise && (cand.hi - s.hi - tc.hi).minCoeff() >= noise) {
                BoundPair padded{(cand.lo.array() + 1e-14).matrix().cwiseMin(pb.lx_max.lo),
                                 (cand.hi.array() + 1e-14).matrix().cwiseMin(pb.lx_max.hi), BoundRole::state};
                if (self_map_holds(model, padded, lu).holds) {
                    lc = std::move(padded);
                    converged = true;
                    break;
                }
            }
        }
    }
    if (!converged) {
        res.reason = "bound iteration did not converge";
        return res;
    }

    if (lc.size() == 0 && last_step == 0.0 && self_map_holds(model, l, lu).holds) {
        // the iteration stopped on an exact fixed point (e.g. a zero input box)
        lc = l;
    }
    if (lc.size() == 0) {
        // Step strictly above the least fixed point (the remaining gap is a
        // small multiple of the last step).
        const double pad = 100.0 * last_step + 1e-14;
        lc = BoundPair{(l.lo * (1.0 + opt.inflate)).array() + pad, (l.hi * (1.0 + opt.inflate)).array() + pad,
                       BoundRole::state};
        lc.lo = lc.lo.cwiseMin(pb.lx_max.lo);
        lc.hi = lc.hi.cwiseMin(pb.lx_max.hi);
    }
    const SlackReport sm = self_map_holds(model, lc, lu);
    if (!sm.holds) {
        res.reason = "self-mapping not verified at the converged bound";
        return res;
    }
    const SlackReport op =
        mode == BoundMode::exact ? operational_holds(model, lc, lu) : operational_holds_linear(model, lc, lu, pb.caps);
    if (!op.holds) {
        Eigen::Index r = 0;
        op.slack_hi.minCoeff(&r);
        res.failed_row = static_cast<int>(r);
        res.reason = "operational limit: " + describe_constraint_row(model, r);
        return res;
    }
    res.certified = true;
    res.lx = std::move(lc);
    return res;
}

double relaxation_spectral_radius(const FixedPointModel& model, const CertificationProblem& pb, int iterations) {
    const auto m = static_cast<Eigen::Index>(model.edge_count());
    const Eigen::Index rows = static_cast<Eigen::Index>(model.row_count());
    BoundPair v = BoundPair::zeros(rows, BoundRole::state);
    v.hi.head(2 * m).setOnes();
    v.lo.head(2 * m).setOnes();
    // keep the probe inside the caps; the map is positively homogeneous
    const double cap = std::min(pb.caps.theta.minCoeff(), pb.caps.rho.minCoeff());
    double radius = 0.0;
    for (int k = 0; k < iterations; ++k) {
        const double n = std::max(v.hi.head(2 * m).maxCoeff(), v.lo.head(2 * m).maxCoeff());
        if (n <= 0.0) return 0.0;
        v = v.scaled(0.5 * cap / n);
        const double before = 0.5 * cap;
        BoundPair t = tau_linear(v, model, pb.caps);
        const double after = std::max(t.hi.head(2 * m).maxCoeff(), t.lo.head(2 * m).maxCoeff());
        radius = after / before;
        v = BoundPair{t.lo, t.hi, BoundRole::state};
    }
    return radius;
}

BoundPair objective_box(const Objective& o, const CertificationProblem& pb, double level) {
    BoundPair lu = pb.lu_floor;
    switch (o.kind) {
        case ObjectiveKind::loadability:
            lu.hi += level * o.direction.cwiseMax(0.0);
            lu.lo += level * (-o.direction).cwiseMax(0.0);
            break;
        case ObjectiveKind::robustness:
            lu.hi += level * o.weights;
            lu.lo += level * o.weights;
            break;
        case ObjectiveKind::chance:
            lu.hi += level * o.std_devs;
            lu.lo += level * o.std_devs;
            break;
    }
    lu.role = BoundRole::input;
    return lu;
}

namespace {

struct LevelSearch {
    double level = 0.0;
    FixedUResult at_level;
    std::string binding;
    int probes = 0;
    int iterations = 0;
};

// Largest certified level; `lo` must already be known to certify (0 means the floor box).
LevelSearch search_level(const FixedPointModel& model, const Objective& o, const CertificationProblem& pb,
                         BoundMode mode, const CertifierOptions& opt, double lo, double hi_guess) {
    LevelSearch s;
    auto probe = [&](double level) {
        ++s.probes;
        auto r = certify_fixed_u(model, objective_box(o, pb, level), pb, mode, opt);
        s.iterations += r.iterations;
        return r;
    };
    s.at_level = probe(lo);
    if (!s.at_level.certified) {
        s.binding = s.at_level.reason;
        s.level = -1.0;
        return s;
    }
    s.level = lo;
    double hi = lo > 0.0 ? 2.0 * lo : hi_guess;
    FixedUResult r;
    int d = 0;
    for (; d < opt.max_doublings; ++d) {
        r = probe(hi);
        if (!r.certified) break;
        s.level = hi;
        s.at_level = std::move(r);
        hi *= 2.0;
    }
    if (d == opt.max_doublings) {
        s.binding = "level search hit the doubling limit";
        return s;
    }
    s.binding = r.reason;
    while (hi - s.level > opt.rel_tol * s.level && hi > 1e-12) {
        const double mid = s.level > 0.0 ? 0.5 * (s.level + hi) : 0.5 * hi;
        r = probe(mid);
        if (r.certified) {
            s.level = mid;
            s.at_level = std::move(r);
        } else {
            hi = mid;
            s.binding = r.reason;
        }
    }
    return s;
}

double level_guess(const Objective& o) {
    const Eigen::VectorXd& v =
        o.kind == ObjectiveKind::loadability ? o.direction : (o.kind == ObjectiveKind::robustness ? o.weights : o.std_devs);
    return 1e-2 / std::max(v.cwiseAbs().maxCoeff(), 1e-12);
}

// Coordinate ascent on the chance score from a certified starting box.
void chance_ascent(const FixedPointModel& model, const Objective& o, const CertificationProblem& pb, BoundMode mode,
                   const CertifierOptions& opt, BoundPair& lu, FixedUResult& at, int& probes, int& iterations) {
    const auto n = lu.size();
    Eigen::VectorXd step_hi = 0.25 * o.std_devs;
    Eigen::VectorXd step_lo = 0.25 * o.std_devs;
    double score = chance_score(lu, o.std_devs);
    for (int pass = 0; pass < 50; ++pass) {
        bool improved = false;
        for (Eigen::Index k = 0; k < n; ++k) {
            for (int side = 0; side < 2; ++side) {
                Eigen::VectorXd& step = side == 0 ? step_hi : step_lo;
                BoundPair trial = lu;
                (side == 0 ? trial.hi : trial.lo)[k] += step[k];
                const double gain = chance_score(trial, o.std_devs) - score;
                if (gain <= opt.chance_min_gain) {
                    step[k] *= 0.5;
                    continue;
                }
                ++probes;
                auto r = certify_fixed_u(model, trial, pb, mode, opt);
                iterations += r.iterations;
                if (r.certified) {
                    lu = std::move(trial);
                    at = std::move(r);
                    score += gain;
                    step[k] *= 2.0;
                    improved = true;
                } else {
                    step[k] *= 0.5;
                }
            }
        }
        if (!improved) break;
    }
}

Certificate run_search(const FixedPointModel& model, const Objective& o, const CertificationProblem& pb,
                       BoundMode mode, const CertifierOptions& opt, double lo) {
    const auto t0 = std::chrono::steady_clock::now();
    Certificate cert;
    cert.objective = o;
    const LevelSearch s = search_level(model, o, pb, mode, opt, lo, level_guess(o));
    cert.diagnostics.probes = s.probes;
    cert.diagnostics.iterations = s.iterations;
    if (s.level < 0.0) {
        cert.status = CertificateStatus::zero;
        cert.diagnostics.binding = {s.binding};
        return cert;
    }
    cert.lu = objective_box(o, pb, s.level);
    cert.lx = s.at_level.lx;
    cert.value = s.level;
    if (!s.binding.empty()) cert.diagnostics.binding = {s.binding};
    if (o.kind == ObjectiveKind::chance) {
        FixedUResult at = s.at_level;
        chance_ascent(model, o, pb, mode, opt, cert.lu, at, cert.diagnostics.probes, cert.diagnostics.iterations);
        cert.lx = at.lx;
        cert.value = chance_score(cert.lu, o.std_devs);
    }
    cert.status = s.level < 1e-9 && o.kind != ObjectiveKind::chance
                      ? CertificateStatus::zero
                      : (mode == BoundMode::exact ? CertificateStatus::certified_nonlinear
                                                  : CertificateStatus::certified_linear_relaxation);
    cert.diagnostics.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return cert;
}

void finalize(const FixedPointModel& model, const CertificationProblem& pb, Certificate& cert) {
    const SlackReport sm = self_map_holds(model, cert.lx, cert.lu);
    const SlackReport op = cert.status == CertificateStatus::certified_nonlinear
                               ? operational_holds(model, cert.lx, cert.lu)
                               : operational_holds_linear(model, cert.lx, cert.lu, pb.caps);
    if (!sm.holds || !op.holds || !cert.lx.dominated_by(pb.lx_max)) {
        throw std::logic_error("certificate failed exact re-verification");
    }
    cert.diagnostics.self_map_slack = sm.min_slack();
    cert.diagnostics.operational_slack = op.slack_hi.size() ? op.slack_hi.minCoeff() : 0.0;
    cert.injection_box = injection_box(model, cert.lu, pb);
}

}  // namespace

CertificationProblem with_angle_cap(const CertificationProblem& pb, double theta_cap) {
    if (!(theta_cap > 0.0)) throw std::invalid_argument("angle cap must be positive");
    CertificationProblem out = pb;
    const auto m = out.caps.theta.size();
    out.caps.theta = out.caps.theta.cwiseMin(theta_cap);
    out.lx_max.hi.head(m) = out.lx_max.hi.head(m).cwiseMin(out.caps.theta);
    out.lx_max.lo.head(m) = out.lx_max.lo.head(m).cwiseMin(out.caps.theta);
    return out;
}

Certificate lp_relaxation_init(const FixedPointModel& model, const Objective& o, const CertificationProblem& pb,
                               const CertifierOptions& opt) {
    o.validate(model.input_count());
    if (opt.cap_scales.empty()) throw std::invalid_argument("no relaxation cap scales");
    const double full_cap = pb.caps.theta.maxCoeff();
    auto with_scale = [&](double scale) {
        if (!(scale > 0.0) || scale > 1.0) throw std::invalid_argument("cap scale must be in (0, 1]");
        return with_angle_cap(pb, full_cap * scale);
    };
    // coarse sweep over caps, then refine the best one
    CertifierOptions coarse = opt;
    coarse.rel_tol = std::max(opt.rel_tol, 2e-2);
    Certificate best;
    double best_scale = 0.0;
    int probes = 0, iterations = 0;
    for (double scale : opt.cap_scales) {
        const CertificationProblem scaled = with_scale(scale);
        Certificate cert = run_search(model, o, scaled, BoundMode::linear, coarse, 0.0);
        probes += cert.diagnostics.probes;
        iterations += cert.diagnostics.iterations;
        const bool better = cert.status != CertificateStatus::zero &&
                            (best.status == CertificateStatus::zero || cert.value > best.value);
        if (better) {
            best = std::move(cert);
            best_scale = scale;
        } else if (best.status == CertificateStatus::zero && best.diagnostics.binding.empty()) {
            best.diagnostics.binding = cert.diagnostics.binding;
        }
    }
    if (best.status != CertificateStatus::zero) {
        const CertificationProblem scaled = with_scale(best_scale);
        if (coarse.rel_tol > opt.rel_tol && o.kind != ObjectiveKind::chance) {
            Certificate fine = run_search(model, o, scaled, BoundMode::linear, opt, best.value);
            probes += fine.diagnostics.probes;
            iterations += fine.diagnostics.iterations;
            if (fine.status != CertificateStatus::zero && fine.value >= best.value) best = std::move(fine);
        }
        best.diagnostics.spectral_radius = relaxation_spectral_radius(model, scaled);
        best.diagnostics.theta_cap = scaled.caps.theta.maxCoeff();
        finalize(model, scaled, best);
    }
    best.objective = o;
    best.diagnostics.probes = probes;
    best.diagnostics.iterations = iterations;
    best.diagnostics.value_linear = best.status == CertificateStatus::zero ? 0.0 : best.value;
    return best;
}

Certificate maximize(const FixedPointModel& model, const Objective& o, const CertificationProblem& pb,
                     const CertifierOptions& opt) {
    o.validate(model.input_count());
    const auto t0 = std::chrono::steady_clock::now();
    Certificate lp = lp_relaxation_init(model, o, pb, opt);
    Certificate out;
    if (opt.lp_only) {
        out = std::move(lp);
    } else {
        // the relaxed level certifies under exact bounds too, so it brackets from below
        const double start = lp.status == CertificateStatus::zero ? 0.0 : lp.value;
        const double lo = o.kind == ObjectiveKind::chance ? 0.0 : start;
        out = run_search(model, o, pb, BoundMode::exact, opt, o.kind == ObjectiveKind::chance ? 0.0 : lo);
        out.diagnostics.spectral_radius = lp.diagnostics.spectral_radius;
        out.diagnostics.theta_cap = lp.diagnostics.theta_cap;
        out.diagnostics.value_linear = lp.value;
        out.diagnostics.probes += lp.diagnostics.probes;
        out.diagnostics.iterations += lp.diagnostics.iterations;
        if (out.status != CertificateStatus::zero) finalize(model, pb, out);
    }
    out.diagnostics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (out.status == CertificateStatus::zero) {
        std::string why = out.diagnostics.binding.empty() ? "" : ": " + out.diagnostics.binding.front();
        throw ZeroCertificate("no nonzero certificate" + why);
    }
    return out;
}

namespace {

// Range of V^2 a over V in [vmin, vmax] that is guaranteed for every a in [alo, ahi].
std::pair<double, double> power_range(double alo, double ahi, double vmin, double vmax) {
    const double hi = ahi >= 0.0 ? vmin * vmin * ahi : vmax * vmax * ahi;
    const double lo = alo >= 0.0 ? vmax * vmax * alo : vmin * vmin * alo;
    return {lo, hi};
}

}  // namespace

std::vector<bool> held_inputs(const ProblemOptions& options, std::size_t inputs) {
    std::vector<bool> held(inputs, false);
    if (options.load_model != LoadModel::constant_admittance || options.varied.empty()) return held;
    if (options.varied.size() != inputs) throw std::invalid_argument("varied-input mask size does not match");
    for (std::size_t c = 0; c < inputs; ++c) held[c] = !options.varied[c];
    return held;
}

std::vector<InjectionRange> injection_box(const FixedPointModel& model, const BoundPair& lu,
                                          const CertificationProblem& pb) {
    return injection_box(model, lu, pb.v_min, pb.v_max, held_inputs(pb.options, model.input_count()));
}

std::vector<InjectionRange> injection_box(const FixedPointModel& model, const BoundPair& lu,
                                          const Eigen::VectorXd& v_min, const Eigen::VectorXd& v_max,
                                          const std::vector<bool>& held) {
    if (!held.empty() && held.size() != model.input_count()) throw std::invalid_argument("held mask size mismatch");
    const auto& base = model.base();
    std::vector<InjectionRange> out;
    for (auto k : model.load_buses()) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (!(v_min[kk] <= base.v[kk] && base.v[kk] <= v_max[kk]) || !(v_min[kk] > 0.0)) {
            throw std::invalid_argument("voltage band does not contain the base voltage");
        }
        const double v2 = base.v[kk] * base.v[kk];
        double gp = 0.0, gm = 0.0, bp = 0.0, bm = 0.0;
        bool p_held = false, q_held = false;
        for (std::size_t c = 0; c < model.inputs().size(); ++c) {
            const auto& in = model.inputs()[c];
            if (in.bus != k) continue;
            const auto cc = static_cast<Eigen::Index>(c);
            (in.kind == InputKind::g ? gp : bp) = lu.hi[cc];
            (in.kind == InputKind::g ? gm : bm) = lu.lo[cc];
            if (!held.empty() && held[c]) (in.kind == InputKind::g ? p_held : q_held) = true;
        }
        // p = V^2 a with a = p*/V*^2 + g~ ; q = -V^2 a with a = -q*/V*^2 + b~
        const double ap = base.p[kk] / v2;
        const double aq = -base.q[kk] / v2;
        InjectionRange r;
        r.bus = k;
        std::tie(r.p_min, r.p_max) = power_range(ap - gm, ap + gp, v_min[kk], v_max[kk]);
        const auto [nq_lo, nq_hi] = power_range(aq - bm, aq + bp, v_min[kk], v_max[kk]);
        r.q_min = -nq_hi;
        r.q_max = -nq_lo;
        // a coordinate that only carries its floor maps to a single power value;
        // rounding may leave the ends crossed by a few ulps
        auto snap = [](double& lo, double& hi) {
            if (lo > hi && lo - hi <= 1e-12 * (1.0 + std::abs(lo))) lo = hi = 0.5 * (lo + hi);
        };
        snap(r.p_min, r.p_max);
        snap(r.q_min, r.q_max);
        auto sweep = [&](double a, double& lo, double& hi) {
            const double x = v_min[kk] * v_min[kk] * a;
            const double y = v_max[kk] * v_max[kk] * a;
            lo = std::min(x, y);
            hi = std::max(x, y);
        };
        r.p_held = p_held;
        r.q_held = q_held;
        if (p_held) sweep(ap, r.p_min, r.p_max);
        if (q_held) {
            sweep(-aq, r.q_min, r.q_max);
        }
        out.push_back(r);
    }
    return out;
}

BrouwerReport verify_brouwer(const FixedPointModel& model, const Certificate& cert, int n_samples,
                             std::uint64_t seed) {
    BrouwerReport rep;
    const auto n = static_cast<Eigen::Index>(model.input_count());
    std::mt19937_64 rng(seed);
    auto uni = [&] { return unit_uniform(rng()); };

    auto run = [&](const Eigen::VectorXd& u) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.state_count()));
        bool settled = false;
        for (int it = 0; it < 500; ++it) {
            Eigen::VectorXd xn = model.fixed_point_map(x, u);
            const Eigen::VectorXd ax = model.A() * xn;
            for (Eigen::Index i = 0; i < ax.size(); ++i) {
                const double lim = ax[i] >= 0.0 ? cert.lx.hi[i] : cert.lx.lo[i];
                const double ratio = lim > 0.0 ? std::abs(ax[i]) / lim - 1.0 : (ax[i] == 0.0 ? -1.0 : 1.0);
                rep.worst_excursion = std::max(rep.worst_excursion, ratio);
                if (std::abs(ax[i]) > lim * (1.0 + 1e-9) + 1e-13) {
                    ++rep.excursions;
                    return;
                }
            }
            const double step = (xn - x).cwiseAbs().maxCoeff();
            x = std::move(xn);
            if (step <= 1e-13) {
                settled = true;
                break;
            }
        }
        const double res = model.fixed_point_residual(x, u).cwiseAbs().maxCoeff();
        rep.worst_residual = std::max(rep.worst_residual, res);
        if (!settled || res > 1e-9) ++rep.nonconverged;
    };

    rep.worst_excursion = -1.0;
    if (n <= 10) {
        for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
            Eigen::VectorXd u(n);
            for (Eigen::Index k = 0; k < n; ++k) u[k] = (mask >> k) & 1 ? cert.lu.hi[k] : -cert.lu.lo[k];
            run(u);
            ++rep.vertices;
        }
    } else {
        for (int v = 0; v < 1024; ++v) {
            Eigen::VectorXd u(n);
            for (Eigen::Index k = 0; k < n; ++k) u[k] = uni() < 0.5 ? cert.lu.hi[k] : -cert.lu.lo[k];
            run(u);
            ++rep.vertices;
        }
    }
    for (int s = 0; s < n_samples; ++s) {
        Eigen::VectorXd u(n);
        for (Eigen::Index k = 0; k < n; ++k) u[k] = -cert.lu.lo[k] + uni() * (cert.lu.hi[k] + cert.lu.lo[k]);
        run(u);
        ++rep.samples;
    }
    return rep;
}

}  // namespace sscert
