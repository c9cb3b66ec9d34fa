#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "fixtures.hpp"
#include "sscert/model.hpp"

using namespace sscert;

namespace {

struct Built {
    PowerNetwork net;
    OperatingPoint base;
    FixedPointModel model;
};

Built build(const PowerNetwork& net, const ConstraintOptions& co = {}) {
    auto base = solve_base(net);
    FixedPointModel model(net, base, all_load_inputs(net), co);
    return {net, std::move(base), std::move(model)};
}

Built build_case(const char* name, const ConstraintOptions& co = {}) {
    return build(load_matpower(fixtures::data(name)), co);
}

Eigen::VectorXd random_state(std::mt19937_64& rng, Eigen::Index n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = u(rng);
    return x;
}

// Solved point after moving one load's active power.
OperatingPoint perturbed(const Built& b, std::size_t bus, double dp) {
    auto u = base_schedule(b.net);
    u.p[static_cast<Eigen::Index>(bus)] += dp;
    auto r = solve_at_injection(b.net, u, b.base);
    REQUIRE(r.converged);
    return r.point;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("two-bus structure") {
    const auto b = build(fixtures::two_bus(50.0));
    CHECK(b.model.M().rows() == 2);
    CHECK(b.model.M().cols() == 4);
    CHECK(b.model.state_count() == 2);
    CHECK(Eigen::MatrixXd(b.model.R()).isApprox(Eigen::MatrixXd::Identity(2, 2)));
    // rows: one angle, one log-voltage edge row, one nodal voltage row
    CHECK(b.model.row_count() == 3);
}

TEST_CASE("M f(0) reproduces the base nodal admittances") {
    for (const char* name : {"case9.m", "case57.m"}) {
        CAPTURE(name);
        const auto b = build_case(name);
        const auto adm = build_edge_admittances(b.net);
        const Eigen::VectorXd mf = b.model.M() * b.model.base_primitives();
        CHECK((mf - b.model.ustar()).cwiseAbs().maxCoeff() <= 1e-10);
        for (std::size_t k = 0; k < b.net.bus_count(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            const double v2 = b.base.v[kk] * b.base.v[kk];
            if (b.model.g_equation(k) >= 0) {
                CHECK(std::abs(mf[b.model.g_equation(k)] - (b.base.p[kk] / v2 - adm.y_d[kk].real())) <= 1e-10);
            }
            if (b.model.b_equation(k) >= 0) {
                CHECK(std::abs(mf[b.model.b_equation(k)] - (-b.base.q[kk] / v2 - adm.y_d[kk].imag())) <= 1e-10);
            }
        }
    }
}

TEST_CASE("certificate matrices agree with their definitions") {
    const auto b = build_case("case9.m");
    const auto& m = b.model;
    const Eigen::MatrixXd R = Eigen::MatrixXd(m.R());
    const Eigen::MatrixXd Mm = Eigen::MatrixXd(m.M());
    Eigen::MatrixXd jr(R.rows(), R.cols()), jm(Mm.rows(), Mm.cols());
    for (Eigen::Index c = 0; c < R.cols(); ++c) jr.col(c) = m.solve_jstar(R.col(c));
    for (Eigen::Index c = 0; c < Mm.cols(); ++c) jm.col(c) = m.solve_jstar(Mm.col(c));
    const Eigen::MatrixXd A = Eigen::MatrixXd(m.A());
    CHECK((m.B() - A * jr).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((m.C() + A * jm).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((Eigen::MatrixXd(m.Jstar()) - Mm * Eigen::MatrixXd(m.L())).cwiseAbs().maxCoeff() <= 1e-12);

    for (const Eigen::MatrixXd* f : {&m.B(), &m.C(), &m.D(), &m.E()}) {
        const auto s = split_pm(*f);
        CHECK((s.plus - s.minus - *f).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(s.plus.cwiseProduct(s.minus).cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.plus.minCoeff() >= 0.0);
        CHECK(s.minus.minCoeff() >= 0.0);
    }
}

TEST_CASE("split_pm") {
    Eigen::MatrixXd f(1, 2);
    f << 1.0, -2.0;
    auto s = split_pm(f);
    CHECK(s.plus(0, 0) == 1.0);
    CHECK(s.plus(0, 1) == 0.0);
    CHECK(s.minus(0, 0) == 0.0);
    CHECK(s.minus(0, 1) == 2.0);
    s = split_pm(Eigen::MatrixXd::Zero(3, 3));
    CHECK(s.plus.isZero(0.0));
    CHECK(s.minus.isZero(0.0));

    std::mt19937_64 rng(7);
    Eigen::MatrixXd g = Eigen::MatrixXd::NullaryExpr(5, 4, [&]() { return std::normal_distribution<double>()(rng); });
    const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(4, 0.1, 0.4);
    const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, 1.0, 2.0);
    s = split_pm(g);
    CHECK((split_apply(g, a, c) - (s.plus * a + s.minus * c)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("primitives") {
    const auto b = build(fixtures::two_bus(50.0));
    const auto& m = b.model;
    const Eigen::VectorXd f0 = m.primitives(Eigen::VectorXd::Zero(2));
    CHECK(f0[0] == 1.0);
    CHECK(f0[1] == 0.0);
    CHECK(f0[2] == 0.0);
    CHECK(f0[3] == 0.0);

    // the load-bus angle moves the single edge by -theta
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    x[m.theta_state(1)] = -M_PI / 6.0;
    const Eigen::VectorXd f = m.primitives(x);
    CHECK(f[0] == doctest::Approx(std::cos(M_PI / 6.0)));
    CHECK(f[1] == doctest::Approx(0.0));
    CHECK(f[2] == doctest::Approx(0.5));
    CHECK(f[3] == doctest::Approx(0.0));

    SUBCASE("complex exponential form") {
        const auto c = build_case("case9.m");
        std::mt19937_64 rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            const Eigen::VectorXd xs = random_state(rng, static_cast<Eigen::Index>(c.model.state_count()), 0.3);
            const Eigen::VectorXd p = c.model.primitives(xs);
            const Eigen::VectorXd dt = c.model.edge_theta(xs);
            const Eigen::VectorXd dr = c.model.edge_rho(xs);
            const auto ne = static_cast<Eigen::Index>(c.model.edge_count());
            for (Eigen::Index e = 0; e < ne; ++e) {
                const Complex up = std::exp(Complex(dr[e], dt[e]));
                const Complex dn = std::exp(Complex(-dr[e], -dt[e]));
                CHECK(std::abs(p[e] - 0.5 * (up + dn).real()) <= 1e-12);
                CHECK(std::abs(p[ne + e] - 0.5 * (up - dn).real()) <= 1e-12);
                CHECK(std::abs(p[2 * ne + e] - 0.5 * (up - dn).imag()) <= 1e-12);
                CHECK(std::abs(p[3 * ne + e] - 0.5 * (up + dn).imag()) <= 1e-12);
            }
        }
    }
}

TEST_CASE("L matches central differences of the primitives") {
    for (const char* name : {"case9.m", "case39.m", "case57.m"}) {
        CAPTURE(name);
        const auto b = build_case(name);
        const auto n = static_cast<Eigen::Index>(b.model.state_count());
        const Eigen::MatrixXd L = Eigen::MatrixXd(b.model.L());
        const double h = 1e-6;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e[i] = h;
            const Eigen::VectorXd fd = (b.model.primitives(e) - b.model.primitives(-e)) / (2.0 * h);
            worst = std::max(worst, (fd - L.col(i)).cwiseAbs().maxCoeff());
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("residual2") {
    const auto b = build_case("case9.m");
    const auto n = static_cast<Eigen::Index>(b.model.state_count());
    CHECK(b.model.residual2(Eigen::VectorXd::Zero(n)).isZero(0.0));

    SUBCASE("vanishes faster than the step") {
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
            e[i] = 1e-4;
            CHECK(b.model.residual2(e).norm() / 1e-4 < 1e-3);
        }
    }
    SUBCASE("single edge sine residual") {
        const auto t = build(fixtures::two_bus(50.0));
        Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
        x[t.model.theta_state(1)] = -0.4;
        const Eigen::VectorXd r = t.model.residual2(x);
        CHECK(r[2] == doctest::Approx(std::sin(0.4) - 0.4).epsilon(1e-12));
        CHECK(r[2] == doctest::Approx(-0.010582).epsilon(1e-4));
    }
    SUBCASE("superlinear decay") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 10; ++trial) {
            const Eigen::VectorXd x = random_state(rng, n, 0.2);
            double prev = std::numeric_limits<double>::infinity();
            for (double alpha : {1.0, 0.5, 0.25, 0.125}) {
                const double ratio = b.model.residual2(alpha * x).cwiseAbs().maxCoeff() / alpha;
                CHECK(ratio < prev);
                prev = ratio;
            }
        }
    }
}

TEST_CASE("fixed-point residual") {
    const auto b = build_case("case9.m");
    const auto& m = b.model;
    const auto n = static_cast<Eigen::Index>(m.state_count());
    const auto ni = static_cast<Eigen::Index>(m.input_count());
    CHECK(m.fixed_point_residual(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(ni)).isZero(0.0));

    SUBCASE("Newton solutions are fixed points") {
        for (int bus : {5, 7, 9}) {
            const auto pt = perturbed(b, b.net.index_of(bus), -0.3);
            const Eigen::VectorXd x = m.state_deviation(pt);
            const Eigen::VectorXd u = m.input_deviation(pt);
            CHECK(m.fixed_point_residual(x, u).cwiseAbs().maxCoeff() <= 1e-8);
            // the model equations hold on the solved point
            CHECK((m.M() * m.primitives(x) - m.nodal_admittances(pt)).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
    SUBCASE("first-order consistency") {
        const Eigen::MatrixXd R = Eigen::MatrixXd(m.R());
        double prev = 0.0;
        for (double eps : {1e-2, 1e-3}) {
            Eigen::VectorXd u = Eigen::VectorXd::Zero(ni);
            u[0] = eps;
            const Eigen::VectorXd x = m.solve_jstar(R * u);
            const double r = m.fixed_point_residual(x, u).norm();
            if (prev > 0.0) CHECK(r < 0.02 * prev);
            prev = r;
        }
    }
}

TEST_CASE("operational rows follow the solved flows") {
    ConstraintOptions co;
    const auto net = load_matpower(fixtures::data("case9.m"));
    co.s_max.assign(net.branch_count(), 10.0);
    const auto b = build(net, co);
    const auto& m = b.model;
    const auto adm = build_edge_admittances(b.net);
    const auto pt = perturbed(b, b.net.index_of(5), -0.4);
    const Eigen::VectorXd f = m.primitives(m.state_deviation(pt));
    const auto flows = branch_flows(b.net, pt);

    for (auto kind : {ConstraintBlockKind::thermal_from, ConstraintBlockKind::thermal_to}) {
        const auto blk = m.build_T(b.net, kind, co);
        CHECK(blk.rows.size() == 4 * b.net.branch_count());
        CHECK(blk.T.cols() == static_cast<Eigen::Index>(m.primitive_count()));
        const Eigen::VectorXd tf = blk.T * f;
        for (std::size_t r = 0; r < blk.rows.size(); ++r) {
            const auto& row = blk.rows[r];
            const auto e = static_cast<Eigen::Index>(row.element);
            const bool from = kind == ConstraintBlockKind::thermal_from;
            const auto bus = static_cast<Eigen::Index>(from ? b.net.branches[row.element].from
                                                            : b.net.branches[row.element].to);
            const Complex s = from ? flows.from[e] : flows.to[e];
            const Complex self = from ? adm.branch[row.element].yff : adm.branch[row.element].ytt;
            const double v2 = pt.v[bus] * pt.v[bus];
            const bool is_p = row.kind == ConstraintRowKind::thermal_from_p || row.kind == ConstraintRowKind::thermal_to_p;
            const double expect = is_p ? s.real() / v2 - self.real() : s.imag() / v2 + self.imag();
            CHECK(std::abs(row.sign * tf[static_cast<Eigen::Index>(r)] - expect) <= 1e-8);
        }
    }

    const auto q = m.build_T(b.net, ConstraintBlockKind::reactive_gen, co);
    REQUIRE_FALSE(q.rows.empty());
    const Eigen::VectorXd tf = q.T * f;
    for (std::size_t r = 0; r < q.rows.size(); ++r) {
        const auto k = static_cast<Eigen::Index>(q.rows[r].element);
        const double v2 = pt.v[k] * pt.v[k];
        CHECK(std::abs(q.rows[r].sign * tf[static_cast<Eigen::Index>(r)] - (pt.q[k] / v2 + adm.y_d[k].imag())) <= 1e-8);
    }
    // base point strictly inside the generous limits
    CHECK(m.hstar().maxCoeff() < 0.0);
}

}  // TEST_SUITE
