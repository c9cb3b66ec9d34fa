#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "sscert/bounds.hpp"
#include "sscert/model.hpp"

using namespace sscert;

namespace {

struct Built {
    PowerNetwork net;
    OperatingPoint base;
    FixedPointModel model;
};

Built build(const PowerNetwork& net) {
    auto base = solve_base(net);
    FixedPointModel model(net, base, all_load_inputs(net), {});
    return {net, std::move(base), std::move(model)};
}

// State box over the edge rows only, nodal rows left at zero.
BoundPair random_edge_box(std::mt19937_64& rng, const FixedPointModel& m, double theta_max, double rho_max) {
    const auto rows = static_cast<Eigen::Index>(m.row_count());
    const auto ne = static_cast<Eigen::Index>(m.edge_count());
    std::uniform_real_distribution<double> u(0.0, 1.0);
    BoundPair lx = BoundPair::zeros(rows, BoundRole::state);
    for (Eigen::Index e = 0; e < ne; ++e) {
        lx.lo[e] = theta_max * u(rng);
        lx.hi[e] = theta_max * u(rng);
        lx.lo[ne + e] = rho_max * u(rng);
        lx.hi[ne + e] = rho_max * u(rng);
    }
    return lx;
}

// Uniform sample of the edge differences (angle rows, then log-voltage rows).
Eigen::VectorXd sample_edges(std::mt19937_64& rng, const BoundPair& lx, std::size_t ne) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(2 * ne));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = -lx.lo[i] + (lx.lo[i] + lx.hi[i]) * u(rng);
    return z;
}

}  // namespace

TEST_SUITE("bounds") {

TEST_CASE("univariate residual bounds") {
    SUBCASE("angle box [0, 0.4]") {
        const auto u = univariate_bounds({0.0, 0.4}, {0.0, 0.0});
        CHECK(u.d2_sin.hi == doctest::Approx(0.0));
        CHECK(u.d2_sin.lo == doctest::Approx(0.4 - std::sin(0.4)));
        CHECK(u.d2_sin.lo == doctest::Approx(0.010582).epsilon(1e-4));
        CHECK(u.d2_cos.lo == doctest::Approx(1.0 - std::cos(0.4)));
        CHECK(u.d2_cos.lo == doctest::Approx(0.078939).epsilon(1e-4));
        CHECK(u.d2_cos.hi == doctest::Approx(0.0));
    }
    SUBCASE("zero box") {
        const auto u = univariate_bounds({0.0, 0.0}, {0.0, 0.0});
        for (const Span* s : {&u.d_sin, &u.d2_sin, &u.d_sinh, &u.d2_sinh, &u.d2_cos, &u.d2_cosh, &u.d_cos, &u.d_cosh}) {
            CHECK(s->lo == 0.0);
            CHECK(s->hi == 0.0);
        }
    }
    SUBCASE("log-voltage box [0.1, 0.2]") {
        const auto u = univariate_bounds({0.0, 0.0}, {0.1, 0.2});
        CHECK(u.d2_cosh.hi == doctest::Approx(std::cosh(0.2) - 1.0));
        CHECK(u.d2_cosh.hi == doctest::Approx(0.020067).epsilon(1e-4));
        CHECK(u.d2_cosh.lo == doctest::Approx(0.0));
    }
}

TEST_CASE("product bounds") {
    SUBCASE("all zero") {
        const auto p = product_bounds({}, {}, {}, {}, 0.0, 0.0);
        CHECK(p.lo == 0.0);
        CHECK(p.hi == 0.0);
    }
    SUBCASE("cosh times cos with a flat log-voltage") {
        const auto ur = univariate_bounds({0.0, 0.4}, {0.0, 0.0});
        const auto p = product_bounds(ur.d_cosh, ur.d2_cosh, ur.d_cos, ur.d2_cos, 1.0, 1.0);
        CHECK(p.hi == doctest::Approx(0.0));
        CHECK(p.lo == doctest::Approx(1.0 - std::cos(0.4)));
    }
    SUBCASE("sinh times sin on a symmetric box") {
        const auto ur = univariate_bounds({0.3, 0.3}, {0.3, 0.3});
        const auto p = product_bounds(ur.d_sinh, ur.d2_sinh, ur.d_sin, ur.d2_sin, 0.0, 0.0);
        const double expect = std::sinh(0.3) * std::sin(0.3);
        CHECK(p.lo == doctest::Approx(expect).epsilon(1e-12));
        CHECK(p.hi == doctest::Approx(expect).epsilon(1e-12));
        CHECK(expect == doctest::Approx(0.089993).epsilon(1e-5));
    }
}

TEST_CASE("residual bounds on a single edge") {
    const auto b = build(fixtures::two_bus(50.0));
    BoundPair lx = BoundPair::zeros(static_cast<Eigen::Index>(b.model.row_count()), BoundRole::state);
    CHECK(delta2_bounds(lx, 1).lo.isZero(0.0));
    CHECK(delta2_bounds(lx, 1).hi.isZero(0.0));
    lx.hi[0] = 0.4;
    const auto d = delta2_bounds(lx, 1);
    // blocks: cosh cos, sinh cos, cosh sin, sinh sin
    CHECK(d.lo[2] == doctest::Approx(0.010582).epsilon(1e-4));
    CHECK(d.hi[2] == doctest::Approx(0.0));
    CHECK(d.lo[0] == doctest::Approx(0.078939).epsilon(1e-4));
    CHECK(d.hi[0] == doctest::Approx(0.0));

    SUBCASE("tau on one edge is the C contraction of the residual bounds") {
        const auto t = tau(lx, b.model);
        const auto s = split_pm(b.model.C());
        CHECK((t.hi - (s.plus * d.hi + s.minus * d.lo)).cwiseAbs().maxCoeff() <= 1e-14);
        CHECK((t.lo - (s.plus * d.lo + s.minus * d.hi)).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("residual bounds contain sampled residuals") {
    for (const char* name : {"case9.m", "case39.m", "case57.m"}) {
        CAPTURE(name);
        const auto b = build(load_matpower(fixtures::data(name)));
        const auto& m = b.model;
        const auto ne = m.edge_count();
        std::mt19937_64 rng(2024);
        // sample edge differences directly: every point of the edge box is a
        // valid argument of the residual, whether or not a state produces it
        const auto lx = random_edge_box(rng, m, 0.5, 0.05);
        const auto d = delta2_bounds(lx, ne);
        const auto n = static_cast<Eigen::Index>(ne);
        int violations = 0;
        for (int s = 0; s < 100000; ++s) {
            const Eigen::VectorXd z = sample_edges(rng, lx, ne);
            for (Eigen::Index e = 0; e < n; ++e) {
                const double t = z[e], r = z[n + e];
                const double res[4] = {std::cosh(r) * std::cos(t) - 1.0, std::sinh(r) * std::cos(t) - r,
                                       std::cosh(r) * std::sin(t) - t, std::sinh(r) * std::sin(t)};
                for (int k = 0; k < 4; ++k) {
                    const auto i = k * n + e;
                    violations += res[k] < -d.lo[i] - 1e-15 || res[k] > d.hi[i] + 1e-15;
                }
            }
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("residual bounds contain residuals of sampled states") {
    const auto b = build(load_matpower(fixtures::data("case9.m")));
    const auto& m = b.model;
    const auto nx = static_cast<Eigen::Index>(m.state_count());
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-0.15, 0.15);
    const Eigen::MatrixXd A = Eigen::MatrixXd(m.A());
    // box spanned by random states, then check residual2 on states within it
    Eigen::VectorXd span = Eigen::VectorXd::Zero(A.rows());
    for (int s = 0; s < 200; ++s) {
        Eigen::VectorXd x(nx);
        for (Eigen::Index i = 0; i < nx; ++i) x[i] = u(rng);
        span = span.cwiseMax((A * x).cwiseAbs());
    }
    const BoundPair lx = BoundPair::symmetric(span, BoundRole::state);
    const auto d = delta2_bounds(lx, m.edge_count());
    int checked = 0, violations = 0;
    for (int s = 0; s < 100000; ++s) {
        Eigen::VectorXd x(nx);
        for (Eigen::Index i = 0; i < nx; ++i) x[i] = u(rng);
        if (!lx.contains(A * x)) continue;
        ++checked;
        const Eigen::VectorXd r = m.residual2(x);
        violations += ((r + d.lo).minCoeff() < -1e-15) || ((d.hi - r).minCoeff() < -1e-15);
    }
    CHECK(checked > 1000);
    CHECK(violations == 0);
}

TEST_CASE("monotonicity and homogeneity") {
    const auto b = build(load_matpower(fixtures::data("case9.m")));
    const auto& m = b.model;
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto small = random_edge_box(rng, m, 0.25, 0.02);
        auto big = small;
        const auto extra = random_edge_box(rng, m, 0.25, 0.02);
        big.lo += extra.lo;
        big.hi += extra.hi;
        CHECK(delta2_bounds(small, m.edge_count()).dominated_by(delta2_bounds(big, m.edge_count())));
        CHECK(tau(small, m).dominated_by(tau(big, m)));
    }
    CHECK(tau(BoundPair::zeros(static_cast<Eigen::Index>(m.row_count()), BoundRole::state), m).hi.isZero(0.0));

    const auto ni = static_cast<Eigen::Index>(m.input_count());
    BoundPair lu = BoundPair::zeros(ni, BoundRole::input);
    CHECK(sigma(lu, m).hi.isZero(0.0));
    std::uniform_real_distribution<double> u(0.0, 0.1);
    for (Eigen::Index i = 0; i < ni; ++i) {
        lu.lo[i] = u(rng);
        lu.hi[i] = u(rng);
    }
    const auto s1 = sigma(lu, m);
    const auto s2 = sigma(lu.scaled(2.0), m);
    CHECK((s2.hi - 2.0 * s1.hi).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((s2.lo - 2.0 * s1.lo).cwiseAbs().maxCoeff() <= 1e-14);

    SUBCASE("sigma contains the linear image of sampled inputs") {
        int violations = 0;
        for (int s = 0; s < 10000; ++s) {
            Eigen::VectorXd du(ni);
            for (Eigen::Index i = 0; i < ni; ++i) {
                du[i] = -lu.lo[i] + (lu.lo[i] + lu.hi[i]) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            }
            const Eigen::VectorXd z = m.B() * du;
            violations += !s1.contains(z, 1e-14);
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("superlinearity of the residual bounds") {
    const auto b = build(load_matpower(fixtures::data("case57.m")));
    std::mt19937_64 rng(8);
    const auto lx = random_edge_box(rng, b.model, 0.4, 0.05);
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1.0, 0.5, 0.25}) {
        const auto d = delta2_bounds(lx.scaled(alpha), b.model.edge_count());
        const double ratio = std::max(d.lo.maxCoeff(), d.hi.maxCoeff()) / alpha;
        CHECK(ratio < prev);
        prev = ratio;
    }
}

TEST_CASE("linear relaxation dominates the exact bounds") {
    const auto b = build(load_matpower(fixtures::data("case57.m")));
    const auto ne = b.model.edge_count();
    const auto caps = RelaxationCaps::uniform(ne, 0.5, 0.1);
    std::mt19937_64 rng(13);
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto lx = random_edge_box(rng, b.model, 0.5, 0.1);
        const auto exact = delta2_bounds(lx, ne);
        const auto lin = linear_bounds(lx, ne, caps);
        violations += !exact.dominated_by(lin, 1e-14);
    }
    CHECK(violations == 0);

    SUBCASE("secant ties the exact value at the cap") {
        const auto t = build(fixtures::two_bus(50.0));
        BoundPair lx = BoundPair::zeros(static_cast<Eigen::Index>(t.model.row_count()), BoundRole::state);
        lx.lo[0] = 0.5;
        lx.hi[0] = 0.5;
        const auto c1 = RelaxationCaps::uniform(1, 0.5, 0.1);
        const auto exact = delta2_bounds(lx, 1);
        const auto lin = linear_bounds(lx, 1, c1);
        CHECK(exact.lo[2] == doctest::Approx(0.5 - std::sin(0.5)));
        CHECK(exact.lo[2] == doctest::Approx(0.020574).epsilon(1e-4));
        CHECK(lin.lo[2] == doctest::Approx(exact.lo[2]).epsilon(1e-12));
        CHECK(lin.hi[2] == doctest::Approx(exact.hi[2]).epsilon(1e-12));
    }
    SUBCASE("zero box") {
        const BoundPair z = BoundPair::zeros(static_cast<Eigen::Index>(b.model.row_count()), BoundRole::state);
        CHECK(linear_bounds(z, ne, caps).hi.isZero(0.0));
        CHECK(linear_bounds(z, ne, caps).lo.isZero(0.0));
    }
    SUBCASE("caps are validated") {
        CHECK_THROWS(RelaxationCaps::uniform(ne, 2.0, 0.1).validate());
        CHECK_THROWS(RelaxationCaps::uniform(ne, 0.5, 0.0).validate());
    }
}

TEST_CASE("McCormick envelopes") {
    const auto unit = mccormick(0.0, 1.0, 0.0, 1.0);
    CHECK(unit.upper1(1.0, 1.0) == doctest::Approx(1.0));
    CHECK(unit.upper2(1.0, 1.0) == doctest::Approx(1.0));
    const auto two = mccormick(0.0, 2.0, 0.0, 2.0);
    CHECK(two.upper(1.0, 1.0) == doctest::Approx(2.0));
    CHECK_THROWS(mccormick(1.0, 0.0, 0.0, 1.0));

    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int violations = 0;
    for (int s = 0; s < 10000; ++s) {
        const double xl = -1.0 + u(rng), xu = xl + 2.0 * u(rng);
        const double yl = -1.0 + u(rng), yu = yl + 2.0 * u(rng);
        const auto env = mccormick(xl, xu, yl, yu);
        const double x = xl + (xu - xl) * u(rng), y = yl + (yu - yl) * u(rng);
        violations += env.upper(x, y) < x * y - 1e-12 || env.lower(x, y) > x * y + 1e-12;
    }
    CHECK(violations == 0);
}

}  // TEST_SUITE
