#include <doctest.h>

#include "app.hpp"
#include "fixtures.hpp"
#include "sscert/validator.hpp"

using namespace sscert;

namespace {

using Poly = std::vector<Eigen::Vector2d>;

Poly square(double x0, double y0, double side) {
    return {{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}};
}

struct Case9 {
    app::RunConfig cfg;
    app::Setup setup;
    app::Outcome out;
};

const Case9& case9() {
    static const Case9 c = [] {
        app::RunConfig cfg;
        cfg.case_path = fixtures::data("case9.m");
        cfg.plane = {9, 7};
        auto setup = app::prepare(cfg);
        auto out = app::certify(setup, cfg);
        return Case9{cfg, std::move(setup), std::move(out)};
    }();
    return c;
}

}  // namespace

TEST_SUITE("validator") {

TEST_CASE("polygon area and clipping") {
    CHECK(polygon_area(square(0, 0, 2)) == doctest::Approx(4.0));
    Poly cw = square(0, 0, 2);
    std::reverse(cw.begin(), cw.end());
    CHECK(polygon_area(cw) == doctest::Approx(4.0));
    CHECK(polygon_area({}) == 0.0);

    const auto clipped = clip_to_rect(square(0, 0, 2), {1.0, 3.0, -1.0, 1.0});
    CHECK(polygon_area(clipped) == doctest::Approx(1.0));
    CHECK(clip_to_rect(square(0, 0, 1), {5.0, 6.0, 5.0, 6.0}).empty());
    const Poly tri = {{0, 0}, {4, 0}, {0, 4}};
    CHECK(polygon_area(clip_to_rect(tri, {0.0, 2.0, 0.0, 2.0})) == doctest::Approx(4.0));
    CHECK(polygon_area(clip_to_rect(tri, {-1.0, 10.0, -1.0, 10.0})) == doctest::Approx(8.0));
}

TEST_CASE("covering ratio and tightness of a hand-made section") {
    CrossSection sec;
    sec.true_polygon = square(-1, -1, 2);
    sec.cert_rect = {-0.5, 0.5, -1.0, 0.0};
    sec.rays = {{0.0, 1.0, 0.5}, {M_PI / 2, 1.0, 0.0}, {M_PI, 1.0, 0.5}};
    CHECK(covering_ratio(sec) == doctest::Approx(0.25));
    CHECK(tightness(sec) == doctest::Approx(0.5));
}

TEST_CASE("certified case9 box is sound") {
    const auto& c = case9();
    REQUIRE(c.out.certificate);
    const auto& cert = *c.out.certificate;
    const auto rep = monte_carlo_soundness(c.setup.network, c.setup.model, c.out.problem, c.setup.limits, cert, 500, 42);
    CHECK(rep.samples == 500);
    CHECK(rep.failures == 0);
    CHECK(rep.worst_violation <= 0.0);

    SUBCASE("no samples") {
        const auto none = monte_carlo_soundness(c.setup.network, c.setup.model, c.out.problem, c.setup.limits, cert, 0, 42);
        CHECK(none.samples == 0);
        CHECK(none.failures == 0);
    }
    SUBCASE("inflated input box fails") {
        auto bad = cert;
        bad.lu = cert.lu.scaled(3.0);
        const auto r = monte_carlo_soundness(c.setup.network, c.setup.model, c.out.problem, c.setup.limits, bad, 500, 42);
        CHECK(r.failures > 0);
        CHECK_FALSE(r.notes.empty());
    }
}

TEST_CASE("case9 cross section contains the certified rectangle") {
    const auto& c = case9();
    REQUIRE(c.out.certificate);
    const auto truth = truth_schedule(c.setup.network, c.setup.model, c.out.problem);
    const Plane plane{c.out.plane.bus_a, c.out.plane.bus_b};
    auto sec = trace_cross_section(c.setup.network, c.setup.base, truth, plane, c.setup.limits, 32);
    attach_certificate(sec, injection_box(c.setup.model, c.out.certificate->lu, c.out.problem));
    REQUIRE(sec.rays.size() == 32);
    for (const auto& r : sec.rays) CHECK(r.r_cert <= r.r_true * (1.0 + 2e-3));
    const double cover = covering_ratio(sec);
    CHECK(cover > 0.0);
    CHECK(cover <= 1.0);
    CHECK(tightness(sec) <= 1.0 + 2e-3);
    CHECK(sec.base.x() >= sec.cert_rect[0]);
    CHECK(sec.base.x() <= sec.cert_rect[1]);
}

}  // TEST_SUITE
