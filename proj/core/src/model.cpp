#include "sscert/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

namespace sscert {

std::string_view to_string(InputKind kind) { return kind == InputKind::g ? "g" : "b"; }

std::string_view to_string(ConstraintRowKind kind) {
    switch (kind) {
        case ConstraintRowKind::thermal_from_p: return "thermal-from-p";
        case ConstraintRowKind::thermal_from_q: return "thermal-from-q";
        case ConstraintRowKind::thermal_to_p: return "thermal-to-p";
        case ConstraintRowKind::thermal_to_q: return "thermal-to-q";
        case ConstraintRowKind::reactive_gen: return "reactive-gen";
    }
    return "unknown";
}

std::vector<InputCoordinate> all_load_inputs(const PowerNetwork& net) {
    std::vector<InputCoordinate> out;
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        if (net.buses[k].kind == BusKind::load) out.push_back({k, InputKind::g});
    }
    for (std::size_t k = 0; k < net.bus_count(); ++k) {
        if (net.buses[k].kind == BusKind::load) out.push_back({k, InputKind::b});
    }
    return out;
}

SignSplit split_pm(const Eigen::MatrixXd& f) {
    return {f.cwiseMax(0.0), (-f).cwiseMax(0.0)};
}

Eigen::VectorXd split_apply(const Eigen::MatrixXd& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(f.rows());
    const Eigen::Index rows = f.rows();
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
        const double aj = a[j];
        const double bj = b[j];
        if (aj == 0.0 && bj == 0.0) continue;
        const double* col = f.data() + j * rows;
        double* o = out.data();
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double c = col[i];
            o[i] += c > 0.0 ? c * aj : -c * bj;
        }
    }
    return out;
}

struct FixedPointModel::Factorization {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_t;
};

FixedPointModel::~FixedPointModel() = default;
FixedPointModel::FixedPointModel(FixedPointModel&&) noexcept = default;
FixedPointModel& FixedPointModel::operator=(FixedPointModel&&) noexcept = default;

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

// Adds the g (real) or b (imaginary) admittance row of `bus` scaled by `scale`
// into `trip` at row `row`.
void add_admittance_row(Triplets& trip, int row, std::size_t bus, bool imaginary, double scale,
                        const std::vector<EdgeLayout>& edges) {
    const auto m = static_cast<int>(edges.size());
    for (int e = 0; e < m; ++e) {
        const auto& ed = edges[static_cast<std::size_t>(e)];
        Complex yp, ym;
        if (ed.from == bus) {
            yp = ed.yf_hat;
            ym = -ed.yf_hat;
        } else if (ed.to == bus) {
            yp = ed.yt_hat;
            ym = ed.yt_hat;
        } else {
            continue;
        }
        if (!imaginary) {
            trip.emplace_back(row, e, scale * yp.real());
            trip.emplace_back(row, m + e, scale * ym.real());
            trip.emplace_back(row, 2 * m + e, -scale * ym.imag());
            trip.emplace_back(row, 3 * m + e, -scale * yp.imag());
        } else {
            trip.emplace_back(row, e, scale * yp.imag());
            trip.emplace_back(row, m + e, scale * ym.imag());
            trip.emplace_back(row, 2 * m + e, scale * ym.real());
            trip.emplace_back(row, 3 * m + e, scale * yp.real());
        }
    }
}

// Same for a single edge transfer term with given (Y+, Y-).
void add_edge_row(Triplets& trip, int row, int e, int m, Complex yp, Complex ym, bool imaginary,
                  double scale) {
    if (!imaginary) {
        trip.emplace_back(row, e, scale * yp.real());
        trip.emplace_back(row, m + e, scale * ym.real());
        trip.emplace_back(row, 2 * m + e, -scale * ym.imag());
        trip.emplace_back(row, 3 * m + e, -scale * yp.imag());
    } else {
        trip.emplace_back(row, e, scale * yp.imag());
        trip.emplace_back(row, m + e, scale * ym.imag());
        trip.emplace_back(row, 2 * m + e, scale * ym.real());
        trip.emplace_back(row, 3 * m + e, scale * yp.real());
    }
}

Eigen::SparseMatrix<double> from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& trip) {
    Eigen::SparseMatrix<double> out(rows, cols);
    out.setFromTriplets(trip.begin(), trip.end());
    out.prune(0.0);
    return out;
}

// rows x n dense product  X * J^{-1}  computed as (J^{-T} X^T)^T in column chunks.
Eigen::MatrixXd right_solve(const Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu_t,
                            const Eigen::SparseMatrix<double>& x, Eigen::Index n) {
    Eigen::MatrixXd out(x.rows(), n);
    const Eigen::SparseMatrix<double> xt = x.transpose();
    constexpr Eigen::Index chunk = 256;
    for (Eigen::Index c0 = 0; c0 < xt.cols(); c0 += chunk) {
        const Eigen::Index w = std::min(chunk, xt.cols() - c0);
        Eigen::MatrixXd rhs = Eigen::MatrixXd(xt.middleCols(c0, w));
        Eigen::MatrixXd sol = lu_t.solve(rhs);
        out.middleRows(c0, w) = sol.transpose();
    }
    return out;
}

}  // namespace

FixedPointModel::FixedPointModel(const PowerNetwork& net, const OperatingPoint& base,
                                 std::vector<InputCoordinate> inputs, const ConstraintOptions& constraints)
    : base_(base), inputs_(std::move(inputs)), lu_(std::make_unique<Factorization>()) {
    const std::size_t nb = net.bus_count();
    if (static_cast<std::size_t>(base.v.size()) != nb) {
        throw std::invalid_argument("base operating point does not match the network");
    }
    const auto sched = base_schedule(net);
    if (max_mismatch(net, sched, base) > 1e-6) {
        throw std::invalid_argument("base operating point is not a solved power flow");
    }

    for (std::size_t k = 0; k < nb; ++k) {
        if (net.buses[k].kind == BusKind::generator) generators_.push_back(k);
        if (net.buses[k].kind == BusKind::load) loads_.push_back(k);
    }
    theta_index_.assign(nb, -1);
    rho_index_.assign(nb, -1);
    g_row_.assign(nb, -1);
    b_row_.assign(nb, -1);
    int next = 0;
    for (auto k : generators_) theta_index_[k] = next++;
    for (auto k : loads_) theta_index_[k] = next++;
    for (auto k : loads_) rho_index_[k] = next++;
    state_count_ = static_cast<std::size_t>(next);
    next = 0;
    for (auto k : generators_) g_row_[k] = next++;
    for (auto k : loads_) g_row_[k] = next++;
    for (auto k : loads_) b_row_[k] = next++;

    const auto adm = build_edge_admittances(net);
    y_d_ = adm.y_d;

    const auto m = static_cast<int>(net.branch_count());
    edges_.reserve(net.branch_count());
    for (std::size_t e = 0; e < net.branch_count(); ++e) {
        const auto& br = net.branches[e];
        const auto f = static_cast<Eigen::Index>(br.from);
        const auto t = static_cast<Eigen::Index>(br.to);
        EdgeLayout ed{br.from, br.to, base.rho[f] - base.rho[t], base.theta[f] - base.theta[t], {}, {}};
        const Complex z(ed.rho_base, ed.theta_base);
        ed.yt_hat = adm.branch[e].ytf * std::exp(z);
        ed.yf_hat = adm.branch[e].yft * std::exp(-z);
        edges_.push_back(ed);
    }

    const auto n = static_cast<Eigen::Index>(state_count_);
    const auto cols = static_cast<Eigen::Index>(4 * m);

    Triplets trip;
    for (std::size_t k = 0; k < nb; ++k) {
        if (g_row_[k] >= 0) add_admittance_row(trip, g_row_[k], k, false, 1.0, edges_);
        if (b_row_[k] >= 0) add_admittance_row(trip, b_row_[k], k, true, 1.0, edges_);
    }
    M_ = from_triplets(n, cols, trip);

    trip.clear();
    for (int e = 0; e < m; ++e) {
        const auto& ed = edges_[static_cast<std::size_t>(e)];
        if (rho_index_[ed.from] >= 0) trip.emplace_back(m + e, rho_index_[ed.from], 1.0);
        if (rho_index_[ed.to] >= 0) trip.emplace_back(m + e, rho_index_[ed.to], -1.0);
        if (theta_index_[ed.from] >= 0) trip.emplace_back(2 * m + e, theta_index_[ed.from], 1.0);
        if (theta_index_[ed.to] >= 0) trip.emplace_back(2 * m + e, theta_index_[ed.to], -1.0);
    }
    L_ = from_triplets(cols, n, trip);

    trip.clear();
    for (int e = 0; e < m; ++e) {
        const auto& ed = edges_[static_cast<std::size_t>(e)];
        if (theta_index_[ed.from] >= 0) trip.emplace_back(e, theta_index_[ed.from], 1.0);
        if (theta_index_[ed.to] >= 0) trip.emplace_back(e, theta_index_[ed.to], -1.0);
        if (rho_index_[ed.from] >= 0) trip.emplace_back(m + e, rho_index_[ed.from], 1.0);
        if (rho_index_[ed.to] >= 0) trip.emplace_back(m + e, rho_index_[ed.to], -1.0);
    }
    for (std::size_t l = 0; l < loads_.size(); ++l) {
        trip.emplace_back(2 * m + static_cast<int>(l), rho_index_[loads_[l]], 1.0);
    }
    A_ = from_triplets(2 * m + static_cast<Eigen::Index>(loads_.size()), n, trip);

    std::set<std::pair<std::size_t, int>> seen;
    trip.clear();
    for (std::size_t c = 0; c < inputs_.size(); ++c) {
        const auto& in = inputs_[c];
        if (in.bus >= nb) throw std::invalid_argument("input coordinate references a missing bus");
        const int row = in.kind == InputKind::g ? g_row_[in.bus] : b_row_[in.bus];
        if (row < 0) {
            throw std::invalid_argument("bus " + std::to_string(net.buses[in.bus].id) + " has no " +
                                        std::string(to_string(in.kind)) + " equation to drive");
        }
        if (!seen.insert({in.bus, static_cast<int>(in.kind)}).second) {
            throw std::invalid_argument("duplicate input coordinate");
        }
        trip.emplace_back(row, static_cast<int>(c), 1.0);
    }
    R_ = from_triplets(n, static_cast<Eigen::Index>(inputs_.size()), trip);

    J_ = (M_ * L_).pruned();
    lu_->lu.compute(J_);
    const Eigen::SparseMatrix<double> jt = J_.transpose();
    lu_->lu_t.compute(jt);
    if (lu_->lu.info() != Eigen::Success || lu_->lu_t.info() != Eigen::Success) {
        const Eigen::MatrixXd jd(J_);
        Eigen::FullPivLU<Eigen::MatrixXd> dense(jd);
        Eigen::MatrixXd ker = dense.kernel();
        Eigen::VectorXd nv = ker.cols() > 0 ? Eigen::VectorXd(ker.col(0).normalized())
                                            : Eigen::VectorXd::Zero(n);
        throw SingularJacobian("base Jacobian is singular (rank " + std::to_string(dense.rank()) +
                                   " of " + std::to_string(n) + ")",
                               nv);
    }

    ustar_ = M_ * base_primitives();

    {
        const Eigen::MatrixXd a_jinv = right_solve(lu_->lu_t, A_, n);
        B_ = a_jinv * R_;
        C_ = -(a_jinv * M_);
    }

    std::vector<ConstraintBlock> blocks;
    if (constraints.thermal) {
        blocks.push_back(build_T(net, ConstraintBlockKind::thermal_from, constraints));
        blocks.push_back(build_T(net, ConstraintBlockKind::thermal_to, constraints));
    }
    if (constraints.reactive) blocks.push_back(build_T(net, ConstraintBlockKind::reactive_gen, constraints));
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += b.T.rows();
    trip.clear();
    hstar_.resize(total);
    Eigen::Index offset = 0;
    for (const auto& b : blocks) {
        for (int k = 0; k < b.T.outerSize(); ++k) {
            for (Eigen::SparseMatrix<double>::InnerIterator it(b.T, k); it; ++it) {
                trip.emplace_back(static_cast<int>(offset + it.row()), static_cast<int>(it.col()), it.value());
            }
        }
        hstar_.segment(offset, b.T.rows()) = b.hstar;
        constraint_rows_.insert(constraint_rows_.end(), b.rows.begin(), b.rows.end());
        offset += b.T.rows();
    }
    T_ = from_triplets(total, cols, trip);
    if (total > 0) {
        const Eigen::SparseMatrix<double> tl = (T_ * L_).pruned();
        const Eigen::MatrixXd tl_jinv = right_solve(lu_->lu_t, tl, n);
        D_ = tl_jinv * R_;
        E_ = Eigen::MatrixXd(T_) - tl_jinv * M_;
    } else {
        D_.resize(0, static_cast<Eigen::Index>(inputs_.size()));
        E_.resize(0, cols);
    }
}

ConstraintBlock FixedPointModel::build_T(const PowerNetwork& net, ConstraintBlockKind kind,
                                         const ConstraintOptions& opt) const {
    ConstraintBlock out;
    Triplets trip;
    std::vector<double> h;
    const auto m = static_cast<int>(edges_.size());
    const Eigen::VectorXd fstar = base_primitives();

    auto push_row = [&](const Triplets& row_trip, double limit, ConstraintRow info) {
        const int r = static_cast<int>(out.rows.size());
        double value = 0.0;
        for (const auto& t : row_trip) {
            trip.emplace_back(r, t.col(), t.value());
            value += t.value() * fstar[t.col()];
        }
        h.push_back(value - limit);
        out.rows.push_back(info);
    };

    if (kind == ConstraintBlockKind::reactive_gen) {
        for (auto k : generators_) {
            const auto& bus = net.buses[k];
            const double v2 = base_.v[static_cast<Eigen::Index>(k)] * base_.v[static_cast<Eigen::Index>(k)];
            const double bd = y_d_[static_cast<Eigen::Index>(k)].imag();
            // q = -V^2 (b + Im y_d) with V fixed at a generator
            if (std::isfinite(bus.q_max)) {
                Triplets row;
                add_admittance_row(row, 0, k, true, -1.0, edges_);
                push_row(row, bd + bus.q_max / v2, {ConstraintRowKind::reactive_gen, k, +1});
            }
            if (std::isfinite(bus.q_min)) {
                Triplets row;
                add_admittance_row(row, 0, k, true, 1.0, edges_);
                push_row(row, -bd - bus.q_min / v2, {ConstraintRowKind::reactive_gen, k, -1});
            }
        }
    } else {
        const bool from_side = kind == ConstraintBlockKind::thermal_from;
        const auto adm = build_edge_admittances(net);
        const auto flows = branch_flows(net, base_);
        for (int e = 0; e < m; ++e) {
            const auto ee = static_cast<std::size_t>(e);
            if (ee >= opt.s_max.size() || !opt.s_max[ee]) continue;
            const double smax = *opt.s_max[ee];
            const auto& ed = edges_[ee];
            const std::size_t bus = from_side ? ed.from : ed.to;
            const Complex self = from_side ? adm.branch[ee].yff : adm.branch[ee].ytt;
            const Complex yp = from_side ? ed.yf_hat : ed.yt_hat;
            const Complex ym = from_side ? -ed.yf_hat : ed.yt_hat;
            const Complex s_base = from_side ? flows.from[e] : flows.to[e];
            double lp = smax / std::sqrt(2.0);
            double lq = lp;
            const double pa = std::abs(s_base.real());
            const double qa = std::abs(s_base.imag());
            if (opt.split == ThermalSplit::proportional && std::abs(s_base) > 0.0) {
                lp = smax * pa / std::abs(s_base);
                lq = smax * qa / std::abs(s_base);
            } else if (opt.split == ThermalSplit::equal_margin && smax * smax >= pa * pa + qa * qa) {
                // (pa + m)^2 + (qa + m)^2 = smax^2
                const double sum = pa + qa;
                const double margin = 0.5 * (-sum + std::sqrt(sum * sum - 2.0 * (pa * pa + qa * qa - smax * smax)));
                lp = pa + margin;
                lq = qa + margin;
            }
            const double vmax = opt.v_max.size() ? opt.v_max[static_cast<Eigen::Index>(bus)]
                                                 : base_.v[static_cast<Eigen::Index>(bus)];
            const double v2 = vmax * vmax;
            const auto pk = from_side ? ConstraintRowKind::thermal_from_p : ConstraintRowKind::thermal_to_p;
            const auto qk = from_side ? ConstraintRowKind::thermal_from_q : ConstraintRowKind::thermal_to_q;
            // p = V^2 (g + Re self), q = -V^2 (b + Im self); +-(quantity) <= l at worst-case V
            for (int sign : {+1, -1}) {
                Triplets row;
                add_edge_row(row, 0, e, m, yp, ym, false, sign);
                push_row(row, lp / v2 - sign * self.real(), {pk, ee, sign});
            }
            for (int sign : {+1, -1}) {
                Triplets row;
                add_edge_row(row, 0, e, m, yp, ym, true, -sign);
                push_row(row, lq / v2 + sign * self.imag(), {qk, ee, sign});
            }
        }
    }
    out.T = from_triplets(static_cast<Eigen::Index>(out.rows.size()), 4 * m, trip);
    out.hstar = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    return out;
}

Eigen::VectorXd FixedPointModel::solve_jstar(const Eigen::VectorXd& rhs) const { return lu_->lu.solve(rhs); }

Eigen::VectorXd FixedPointModel::edge_theta(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const int a = theta_index_[edges_[e].from];
        const int b = theta_index_[edges_[e].to];
        out[static_cast<Eigen::Index>(e)] = (a >= 0 ? x[a] : 0.0) - (b >= 0 ? x[b] : 0.0);
    }
    return out;
}

Eigen::VectorXd FixedPointModel::edge_rho(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const int a = rho_index_[edges_[e].from];
        const int b = rho_index_[edges_[e].to];
        out[static_cast<Eigen::Index>(e)] = (a >= 0 ? x[a] : 0.0) - (b >= 0 ? x[b] : 0.0);
    }
    return out;
}

Eigen::VectorXd FixedPointModel::primitives(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(edges_.size());
    const Eigen::VectorXd dt = edge_theta(x);
    const Eigen::VectorXd dr = edge_rho(x);
    Eigen::VectorXd f(4 * m);
    for (Eigen::Index e = 0; e < m; ++e) {
        const double ch = std::cosh(dr[e]), sh = std::sinh(dr[e]);
        const double c = std::cos(dt[e]), s = std::sin(dt[e]);
        f[e] = ch * c;
        f[m + e] = sh * c;
        f[2 * m + e] = ch * s;
        f[3 * m + e] = sh * s;
    }
    return f;
}

Eigen::VectorXd FixedPointModel::base_primitives() const {
    const auto m = static_cast<Eigen::Index>(edges_.size());
    Eigen::VectorXd f = Eigen::VectorXd::Zero(4 * m);
    f.head(m).setOnes();
    return f;
}

Eigen::VectorXd FixedPointModel::residual2(const Eigen::VectorXd& x) const {
    const auto m = static_cast<Eigen::Index>(edges_.size());
    const Eigen::VectorXd dt = edge_theta(x);
    const Eigen::VectorXd dr = edge_rho(x);
    Eigen::VectorXd r(4 * m);
    for (Eigen::Index e = 0; e < m; ++e) {
        const double ch = std::cosh(dr[e]), sh = std::sinh(dr[e]);
        const double c = std::cos(dt[e]), s = std::sin(dt[e]);
        r[e] = ch * c - 1.0;
        r[m + e] = sh * c - dr[e];
        r[2 * m + e] = ch * s - dt[e];
        r[3 * m + e] = sh * s;
    }
    return r;
}

Eigen::VectorXd FixedPointModel::fixed_point_map(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    Eigen::VectorXd rhs = -(M_ * residual2(x));
    if (u.size()) rhs += R_ * u;
    return solve_jstar(rhs);
}

Eigen::VectorXd FixedPointModel::fixed_point_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return x - fixed_point_map(x, u);
}

Eigen::VectorXd FixedPointModel::state_deviation(const OperatingPoint& pt) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(state_count_));
    for (std::size_t k = 0; k < theta_index_.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        if (theta_index_[k] >= 0) x[theta_index_[k]] = pt.theta[kk] - base_.theta[kk];
        if (rho_index_[k] >= 0) x[rho_index_[k]] = pt.rho[kk] - base_.rho[kk];
    }
    return x;
}

Eigen::VectorXd FixedPointModel::nodal_admittances(const OperatingPoint& pt) const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(state_count_));
    for (std::size_t k = 0; k < g_row_.size(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const double v2 = pt.v[kk] * pt.v[kk];
        if (g_row_[k] >= 0) y[g_row_[k]] = pt.p[kk] / v2 - y_d_[kk].real();
        if (b_row_[k] >= 0) y[b_row_[k]] = -pt.q[kk] / v2 - y_d_[kk].imag();
    }
    return y;
}

Eigen::VectorXd FixedPointModel::input_deviation(const OperatingPoint& pt) const {
    const Eigen::VectorXd dy = nodal_admittances(pt) - ustar_;
    Eigen::VectorXd u(static_cast<Eigen::Index>(inputs_.size()));
    for (std::size_t c = 0; c < inputs_.size(); ++c) {
        const auto& in = inputs_[c];
        u[static_cast<Eigen::Index>(c)] = dy[in.kind == InputKind::g ? g_row_[in.bus] : b_row_[in.bus]];
    }
    return u;
}

}  // namespace sscert
