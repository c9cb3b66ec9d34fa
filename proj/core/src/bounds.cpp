#include "sscert/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sscert/model.hpp"

namespace sscert {

std::string_view to_string(BoundRole role) {
    switch (role) {
        case BoundRole::state: return "state";
        case BoundRole::input: return "input";
        case BoundRole::residual: return "residual";
        case BoundRole::map_output: return "map-output";
    }
    return "unknown";
}

BoundPair BoundPair::zeros(Eigen::Index n, BoundRole role) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), role};
}

BoundPair BoundPair::symmetric(const Eigen::VectorXd& v, BoundRole role) { return {v, v, role}; }

bool BoundPair::nonnegative() const { return (lo.array() >= 0.0).all() && (hi.array() >= 0.0).all(); }

bool BoundPair::contains(const Eigen::VectorXd& z, double tol) const {
    return z.size() == hi.size() && (z.array() <= hi.array() + tol).all() &&
           (z.array() >= -lo.array() - tol).all();
}

BoundPair BoundPair::scaled(double s) const { return {lo * s, hi * s, role}; }

bool BoundPair::dominated_by(const BoundPair& other, double tol) const {
    return (lo.array() <= other.lo.array() + tol).all() && (hi.array() <= other.hi.array() + tol).all();
}

RelaxationCaps RelaxationCaps::uniform(std::size_t edges, double theta_cap, double rho_cap) {
    const auto n = static_cast<Eigen::Index>(edges);
    RelaxationCaps caps{Eigen::VectorXd::Constant(n, theta_cap), Eigen::VectorXd::Constant(n, rho_cap)};
    caps.validate();
    return caps;
}

void RelaxationCaps::validate() const {
    const double half_pi = std::numbers::pi / 2;
    if (theta.size() != rho.size()) throw std::invalid_argument("relaxation caps size mismatch");
    if ((theta.array() <= 0.0).any() || (theta.array() > half_pi).any()) {
        throw std::invalid_argument("angle cap outside (0, pi/2]");
    }
    if ((rho.array() <= 0.0).any() || (rho.array() > 1.0).any()) {
        throw std::invalid_argument("log-voltage cap outside (0, 1]");
    }
}

namespace {

void check_span(Span s, double cap, const char* what) {
    if (!(s.lo >= 0.0) || !(s.hi >= 0.0)) throw std::domain_error(std::string(what) + " span is negative");
    if (s.lo > cap || s.hi > cap) throw std::domain_error(std::string(what) + " span exceeds cap");
}

}  // namespace

UnivariateResidualBounds univariate_bounds(Span th, Span rh) {
    check_span(th, std::numbers::pi / 2, "angle");
    check_span(rh, 1.0, "log-voltage");
    UnivariateResidualBounds u;
    const double tm = std::max(th.lo, th.hi);
    const double rm = std::max(rh.lo, rh.hi);
    u.d_cos = {1.0 - std::cos(tm), 0.0};
    u.d2_cos = u.d_cos;
    u.d_sin = {std::sin(th.lo), std::sin(th.hi)};
    // sin t - t is decreasing: the positive side comes from the negative end
    u.d2_sin = {th.hi - std::sin(th.hi), th.lo - std::sin(th.lo)};
    u.d_cosh = {0.0, std::cosh(rm) - 1.0};
    u.d2_cosh = u.d_cosh;
    u.d_sinh = {std::sinh(rh.lo), std::sinh(rh.hi)};
    u.d2_sinh = {std::sinh(rh.lo) - rh.lo, std::sinh(rh.hi) - rh.hi};
    return u;
}

Span product_bounds(Span df, Span d2f, Span dg, Span d2g, double fstar, double gstar) {
    if (df.lo < 0 || df.hi < 0 || dg.lo < 0 || dg.hi < 0 || d2f.lo < 0 || d2f.hi < 0 || d2g.lo < 0 ||
        d2g.hi < 0 || fstar < 0 || gstar < 0) {
        throw std::domain_error("product bounds need nonnegative inputs");
    }
    Span out;
    out.hi = std::max(df.hi * dg.hi, df.lo * dg.lo) + fstar * d2g.hi + d2f.hi * gstar;
    out.lo = std::max(df.hi * dg.lo, df.lo * dg.hi) + fstar * d2g.lo + d2f.lo * gstar;
    return out;
}

namespace {

void check_rows(const BoundPair& lx, std::size_t edges) {
    if (static_cast<std::size_t>(lx.size()) < 2 * edges || lx.lo.size() != lx.hi.size()) {
        throw std::invalid_argument("state bound has fewer rows than 2|E|");
    }
}

void put(BoundPair& out, Eigen::Index i, Span s) {
    out.lo[i] = s.lo;
    out.hi[i] = s.hi;
}

}  // namespace

BoundPair delta2_bounds(const BoundPair& lx, std::size_t edges) {
    check_rows(lx, edges);
    const auto m = static_cast<Eigen::Index>(edges);
    BoundPair out = BoundPair::zeros(4 * m, BoundRole::residual);
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto u = univariate_bounds({lx.lo[e], lx.hi[e]}, {lx.lo[m + e], lx.hi[m + e]});
        put(out, e, product_bounds(u.d_cosh, u.d2_cosh, u.d_cos, u.d2_cos, 1.0, 1.0));
        put(out, m + e, product_bounds(u.d_sinh, u.d2_sinh, u.d_cos, u.d2_cos, 0.0, 1.0));
        put(out, 2 * m + e, product_bounds(u.d_cosh, u.d2_cosh, u.d_sin, u.d2_sin, 1.0, 0.0));
        put(out, 3 * m + e, product_bounds(u.d_sinh, u.d2_sinh, u.d_sin, u.d2_sin, 0.0, 0.0));
    }
    return out;
}

namespace {

// Upper bound of x*y for x in [0, xu], y in [0, yu]: the two McCormick upper planes.
double bilinear_upper(double x, double xu, double y, double yu) { return std::min(xu * y, yu * x); }

}  // namespace

BoundPair linear_bounds(const BoundPair& lx, std::size_t edges, const RelaxationCaps& caps) {
    check_rows(lx, edges);
    const auto m = static_cast<Eigen::Index>(edges);
    if (caps.theta.size() != m || caps.rho.size() != m) throw std::invalid_argument("caps size mismatch");
    BoundPair out = BoundPair::zeros(4 * m, BoundRole::residual);
    for (Eigen::Index e = 0; e < m; ++e) {
        const double tu = caps.theta[e];
        const double ru = caps.rho[e];
        const Span th{lx.lo[e], lx.hi[e]};
        const Span rh{lx.lo[m + e], lx.hi[m + e]};
        check_span(th, tu, "angle");
        check_span(rh, ru, "log-voltage");
        const double tm = std::max(th.lo, th.hi);
        const double rm = std::max(rh.lo, rh.hi);

        // secant slopes over [0, cap]
        const double k_cos = (1.0 - std::cos(tu)) / tu;
        const double k_sin2 = (tu - std::sin(tu)) / tu;
        const double k_cosh = (std::cosh(ru) - 1.0) / ru;
        const double k_sinh = std::sinh(ru) / ru;
        const double k_sinh2 = (std::sinh(ru) - ru) / ru;

        const Span d_cos{k_cos * tm, 0.0};
        const Span d_sin{th.lo, th.hi};  // |sin t| <= |t|
        const Span d2_sin{k_sin2 * th.hi, k_sin2 * th.lo};
        const Span d_cosh{0.0, k_cosh * rm};
        const Span d_sinh{k_sinh * rh.lo, k_sinh * rh.hi};
        const Span d2_sinh{k_sinh2 * rh.lo, k_sinh2 * rh.hi};

        const double cos_u = 1.0 - std::cos(tu);
        const double cosh_u = std::cosh(ru) - 1.0;
        const double sinh_u = std::sinh(ru);
        auto prod = [](double a, double au, double b, double bu) { return bilinear_upper(a, au, b, bu); };

        // cosh*cos: dcosh >= 0 >= dcos, product only on the minus side
        Span cc;
        cc.hi = d_cosh.hi;
        cc.lo = prod(d_cosh.hi, cosh_u, d_cos.lo, cos_u) + d_cos.lo;
        // sinh*cos
        Span sc;
        sc.hi = prod(d_sinh.lo, sinh_u, d_cos.lo, cos_u) + d2_sinh.hi;
        sc.lo = prod(d_sinh.hi, sinh_u, d_cos.lo, cos_u) + d2_sinh.lo;
        // cosh*sin
        Span cs;
        cs.hi = prod(d_cosh.hi, cosh_u, d_sin.hi, tu) + d2_sin.hi;
        cs.lo = prod(d_cosh.hi, cosh_u, d_sin.lo, tu) + d2_sin.lo;
        // sinh*sin
        Span ss;
        ss.hi = std::max(prod(d_sinh.hi, sinh_u, d_sin.hi, tu), prod(d_sinh.lo, sinh_u, d_sin.lo, tu));
        ss.lo = std::max(prod(d_sinh.hi, sinh_u, d_sin.lo, tu), prod(d_sinh.lo, sinh_u, d_sin.hi, tu));

        put(out, e, cc);
        put(out, m + e, sc);
        put(out, 2 * m + e, cs);
        put(out, 3 * m + e, ss);
    }
    return out;
}

BoundPair split_product(const Eigen::MatrixXd& f, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                        BoundRole role) {
    if (f.cols() != a.size() || f.cols() != b.size()) throw std::invalid_argument("split product size mismatch");
    const Eigen::Index rows = f.rows();
    BoundPair out = BoundPair::zeros(rows, role);
    auto hi = out.hi.array();
    auto lo = out.lo.array();
    for (Eigen::Index j = 0; j < f.cols(); ++j) {
        const double aj = a[j];
        const double bj = b[j];
        if (aj == 0.0 && bj == 0.0) continue;
        const auto col = f.col(j).array();
        const auto plus = col.max(0.0);
        const auto minus = (-col).max(0.0);
        hi += plus * aj + minus * bj;
        lo += plus * bj + minus * aj;
    }
    (void)rows;
    return out;
}

BoundPair tau(const BoundPair& lx, const FixedPointModel& model) {
    const BoundPair d2 = delta2_bounds(lx, model.edge_count());
    return split_product(model.C(), d2.hi, d2.lo, BoundRole::map_output);
}

BoundPair tau_linear(const BoundPair& lx, const FixedPointModel& model, const RelaxationCaps& caps) {
    const BoundPair d2 = linear_bounds(lx, model.edge_count(), caps);
    return split_product(model.C(), d2.hi, d2.lo, BoundRole::map_output);
}

BoundPair sigma(const BoundPair& lu, const FixedPointModel& model) {
    return split_product(model.B(), lu.hi, lu.lo, BoundRole::map_output);
}

double McCormickEnvelope::upper(double x, double y) const { return std::min(upper1(x, y), upper2(x, y)); }
double McCormickEnvelope::lower(double x, double y) const { return std::max(lower1(x, y), lower2(x, y)); }

McCormickEnvelope mccormick(double xl, double xu, double yl, double yu) {
    if (!(xl <= xu) || !(yl <= yu)) throw std::invalid_argument("empty McCormick box");
    McCormickEnvelope env;
    env.upper1 = {yl, xu, -xu * yl};
    env.upper2 = {yu, xl, -xl * yu};
    env.lower1 = {yl, xl, -xl * yl};
    env.lower2 = {yu, xu, -xu * yu};
    return env;
}

}  // namespace sscert
