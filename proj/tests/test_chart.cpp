#include <catch2/catch.hpp>

#include "glwave/chart.hpp"

using namespace glwave;

namespace {

SurfaceParametrization static_plane(double t_half = 0.6, int m = 64) {
    auto be = std::make_shared<AnalyticSurface>(
        2, [](double, double y1) { return Vec{y1, 0.0}; },
        [](double, double) { return Vec{0.0, 0.0}; },
        [](double, double) { return Vec{1.0, 0.0}; });
    return make_surface(be, -t_half, t_half, m, 13);
}

SurfaceParametrization circle_surface(double R, double t_half, int m = 128,
                                      double speed = 1.0) {
    auto be = std::make_shared<AnalyticSurface>(
        2,
        [R, speed](double t, double y1) {
            double r = R * std::cos(speed * t / R);
            return Vec{r * std::cos(2 * PI * y1), r * std::sin(2 * PI * y1)};
        },
        [R, speed](double t, double y1) {
            double rp = -speed * std::sin(speed * t / R);
            return Vec{rp * std::cos(2 * PI * y1), rp * std::sin(2 * PI * y1)};
        },
        [R, speed](double t, double y1) {
            double r = R * std::cos(speed * t / R);
            return Vec{-2 * PI * r * std::sin(2 * PI * y1), 2 * PI * r * std::cos(2 * PI * y1)};
        });
    return make_surface(be, -t_half, t_half, m, 13);
}

TubularChart plane_chart(double rho0 = 0.3) {
    SurfaceParametrization p = static_plane();
    auto fr = normal_frame(p, 1);
    return build_chart(p, fr, rho0, 0.5);
}

TubularChart circle_chart(double rho0 = 0.3, double T1 = 0.45, int m = 128) {
    SurfaceParametrization p = circle_surface(1.0, T1 + 0.1, m);
    auto fr = normal_frame(p, 1, FrameOrientation::OutwardRadial);
    return build_chart(p, fr, rho0, T1);
}

}  // namespace

TEST_CASE("static plane chart is the identity") {
    TubularChart chart = plane_chart();
    CHECK(chart.rho0 == Approx(0.3));
    Vec y{0.1, 0.4, 0.12};
    Vec x = chart.psi(y);
    CHECK(x[0] == Approx(0.1).margin(1e-12));
    CHECK(x[1] == Approx(0.4).margin(1e-10));
    CHECK(x[2] == Approx(0.12).margin(1e-10));

    MetricData md = chart.metric_at(y);
    CHECK(md.G(0, 0) == Approx(-1.0).margin(1e-9));
    CHECK(md.G(1, 1) == Approx(1.0).margin(1e-9));
    CHECK(md.G(2, 2) == Approx(1.0).margin(1e-9));
    CHECK(std::abs(md.G(0, 1)) + std::abs(md.G(0, 2)) + std::abs(md.G(1, 2)) < 1e-9);
    CHECK(md.sqrt_minus_g == Approx(1.0).margin(1e-9));
    CHECK(norm(md.b) < 1e-7);

    auto inv = chart.invert(Vec{0.1, 0.4, 0.12});
    REQUIRE(inv.inside);
    CHECK(inv.y[0] == Approx(0.1).margin(1e-9));
    CHECK(inv.y[1] == Approx(0.4).margin(1e-9));
    CHECK(inv.y[2] == Approx(0.12).margin(1e-9));

    auto d = chart.signed_distance(Vec{0.0, 0.7, -0.2});
    CHECK(d.d == Approx(-0.2).margin(1e-9));
    CHECK(d.d_t == Approx(0.0).margin(1e-9));

    auto gr = chart.initial_graph(32, 9);
    CHECK(gr.max_b < 1e-10);
    CHECK(gr.max_grad < 1e-8);
}

TEST_CASE("static plane constants achieve their trivial values") {
    TubularChart chart = plane_chart();
    ChartConstants cc = cone_slope(chart);
    CHECK(cc.c_star == Approx(1.0).margin(1e-6));
    CHECK(cc.kappa2 == 1.0);
    CHECK(cc.lambda == Approx(1.0).margin(1e-8));
    CHECK(cc.Lambda == Approx(1.0).margin(1e-8));

    VerificationReport rep = verify_metric_bounds(chart, 120, 16);
    CHECK(rep["coeffs1_y0"].constant < 1e-6);
    CHECK(rep["coeffs2"].constant < 1e-6);
    CHECK(rep["bgood"].constant < 1e-6);
    CHECK(rep["pos1_lower"].constant > 0.9);
    CHECK(rep["ps0lbd"].constant == Approx(1.0).margin(1e-8));
    CHECK(rep["block_inverse_dev"].constant <= 1e-10);
    CHECK(rep["isometry_dev"].constant <= 1e-10);
    CHECK(rep.minimality_residual <= 1e-8);
    for (const auto& r : rep.records) CHECK(r.pass);
}

TEST_CASE("circle chart maps constant y^nu to concentric circles") {
    TubularChart chart = circle_chart();
    for (double ynu : {-0.2, 0.0, 0.15}) {
        for (double y1 : {0.0, 0.3, 0.77}) {
            Vec x = chart.psi(Vec{0.0, y1, ynu});
            double rad = std::sqrt(x[1] * x[1] + x[2] * x[2]);
            CHECK(rad == Approx(1.0 + ynu).margin(1e-6));
        }
    }
    SplitMix64 rng(7);
    double worst = 1;
    for (int i = 0; i < 200; ++i) {
        Vec y{rng.uniform(-0.45, 0.45), rng.uniform(), rng.uniform(-0.3, 0.3)};
        worst = std::min(worst, chart.psi0_dy0(y));
    }
    CHECK(worst > 0.5);
}

TEST_CASE("metric block structure on the surface") {
    TubularChart chart = circle_chart();
    double t = 0.2, y1 = 0.3;
    MetricData md = chart.metric_at(Vec{t, y1, 0.0});
    SurfaceJet j = chart.param.jet(t, y1);
    CHECK(md.G(0, 0) == Approx(-1 + dot(j.ht, j.ht)).margin(1e-7));
    CHECK(md.G(1, 1) == Approx(dot(j.hs, j.hs)).margin(1e-6));
    CHECK(md.G(0, 1) == Approx(0.0).margin(1e-7));
    CHECK(md.G(2, 2) == Approx(1.0).margin(1e-9));
    CHECK(std::abs(md.G(0, 2)) + std::abs(md.G(1, 2)) < 1e-7);
    MetricData md2 = chart.metric_at(Vec{t, y1, 0.21});
    CHECK(md2.Ginv(2, 2) == Approx(1.0).margin(1e-8));
    CHECK(std::abs(md2.Ginv(0, 2)) < 1e-8);
    CHECK(std::abs(md2.Ginv(1, 2)) < 1e-8);
    CHECK(md2.a(0, 0) == Approx(-md2.Ginv(0, 0)));
    CHECK(md2.a(0, 1) == 0.0);
    CHECK(md2.a(1, 1) == Approx(md2.Ginv(1, 1)));
}

TEST_CASE("chart inversion round trip") {
    TubularChart chart = circle_chart();
    SplitMix64 rng(2024);
    for (int i = 0; i < 1000; ++i) {
        Vec y{rng.uniform(-0.4, 0.4), rng.uniform(), rng.uniform(-0.28, 0.28)};
        Vec x = chart.psi(y);
        auto inv = chart.invert(x);
        REQUIRE(inv.inside);
        CHECK(std::abs(inv.y[0] - y[0]) < 1e-9);
        double d1 = std::abs(inv.y[1] - y[1]);
        CHECK(std::min(d1, 1 - d1) < 1e-9);
        CHECK(std::abs(inv.y[2] - y[2]) < 1e-9);
    }
    CHECK_FALSE(chart.invert(Vec{0.0, 2.0, 2.0}).inside);
    CHECK_FALSE(chart.invert(Vec{0.0, 0.05, 0.05}).inside);
}

TEST_CASE("signed distance and eikonal residual on the circle chart") {
    TubularChart chart = circle_chart();
    for (double rad : {0.8, 0.95, 1.2}) {
        Vec x{0.0, rad * std::cos(0.4), rad * std::sin(0.4)};
        auto d = chart.signed_distance(x);
        CHECK(d.d == Approx(rad - 1.0).margin(1e-7));
        CHECK(d.d_t == Approx(0.0).margin(1e-6));
    }
    double h = 1.0 / 256;
    double worst = 0;
    for (double rad : {0.85, 1.1}) {
        for (double th : {0.1, 2.0}) {
            Vec x{0.05, rad * std::cos(th), rad * std::sin(th)};
            worst = std::max(worst, eikonal_residual(chart, x, h));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("chart distance consistency: d(psi(y)) = y^N") {
    TubularChart chart = circle_chart();
    SplitMix64 rng(5);
    for (int i = 0; i < 50; ++i) {
        Vec y{rng.uniform(-0.3, 0.3), rng.uniform(), rng.uniform(-0.25, 0.25)};
        auto d = chart.signed_distance(chart.psi(y));
        CHECK(d.d == Approx(y[2]).margin(1e-9));
    }
}

TEST_CASE("initial graph of the at-rest circle vanishes") {
    TubularChart chart = circle_chart();
    auto gr = chart.initial_graph(48, 9);
    CHECK(gr.max_b < 1e-8);
    CHECK(gr.max_grad < 1e-4);
    CHECK(std::isfinite(gr.max_grad));
}

TEST_CASE("minimality residual: exact circle vs wrong-speed control") {
    TubularChart chart = circle_chart();
    VerificationReport rep = verify_metric_bounds(chart, 150, 16);
    CHECK(rep.minimality_residual <= 1e-6);
    for (const auto& r : rep.records) CHECK(r.pass);
    CHECK(rep["ps0lbd"].constant > 0.3);
    // ellipticity in torus coordinates scales like 1/|h_s|^2 ~ 1/(2 pi r)^2
    CHECK(rep["pos1_lower"].constant > 0.01);
    CHECK(rep["block_inverse_dev"].constant <= 1e-10);
    CHECK(rep["isometry_dev"].constant <= 1e-10);

    SurfaceParametrization wrong = circle_surface(1.0, 0.55, 128, 0.7);
    auto fr = normal_frame(wrong, 1, FrameOrientation::OutwardRadial);
    TubularChart control = build_chart(wrong, fr, 0.3, 0.45);
    double worst = 0;
    for (int i = 0; i < 32; ++i)
        worst = std::max(worst, control.minimality_residual(0.25, i / 32.0));
    CHECK(worst >= 1e-2);
}

TEST_CASE("cone slope of the circle chart is finite and grid stable") {
    TubularChart coarse = circle_chart(0.3, 0.45, 96);
    TubularChart fine = circle_chart(0.3, 0.45, 192);
    ChartConstants c1 = cone_slope(coarse, 300, 31);
    ChartConstants c2 = cone_slope(fine, 300, 31);
    CHECK(std::isfinite(c1.c_star));
    CHECK(c1.c_star > 0.5);
    CHECK(c2.c_star == Approx(c1.c_star).epsilon(0.05));
    CHECK(c1.kappa2 == 1.0);
}

TEST_CASE("chart shrinks rho0 automatically and fails below the minimum") {
    TubularChart chart = circle_chart(2.0);
    CHECK(chart.rho0 < 1.0);
    CHECK(chart.rho0 >= 0.25);

    SurfaceParametrization p = circle_surface(1.0, 0.55, 96);
    auto fr = normal_frame(p, 1, FrameOrientation::OutwardRadial);
    ChartBuildOptions opts;
    opts.min_rho = 1.9;
    CHECK_THROWS_AS(build_chart(p, fr, 2.0, 0.45, opts), GlwError);
}

TEST_CASE("k=2 chart around a straight vortex line") {
    auto be = std::make_shared<AnalyticSurface>(
        3, [](double, double y1) { return Vec{y1, 0.0, 0.0}; },
        [](double, double) { return Vec{0.0, 0.0, 0.0}; },
        [](double, double) { return Vec{1.0, 0.0, 0.0}; });
    SurfaceParametrization line = make_surface(be, -0.6, 0.6, 64, 9);
    auto fr = normal_frame(line, 2);
    TubularChart chart = build_chart(line, fr, 0.25, 0.5);
    Vec y{0.1, 0.3, 0.1, -0.05};
    Vec x = chart.psi(y);
    CHECK(x[0] == Approx(0.1).margin(1e-10));
    CHECK(x[1] == Approx(0.3).margin(1e-9));
    // nu_1 maximizes the last coordinate, so y^2 drives x^3
    CHECK(x[3] == Approx(0.1).margin(1e-9));
    CHECK(std::abs(x[2]) == Approx(0.05).margin(1e-9));
    MetricData md = chart.metric_at(y);
    CHECK(md.sqrt_minus_g == Approx(1.0).margin(1e-8));
    CHECK(norm(md.b) < 1e-6);
    ChartConstants cc = cone_slope(chart, 150);
    CHECK(cc.c_star == Approx(1.0).margin(1e-5));
    CHECK(cc.kappa2 >= 1.0);
    CHECK(cc.kappa2 < 1.5);
    auto inv = chart.invert(chart.psi(y));
    REQUIRE(inv.inside);
    CHECK(std::abs(inv.y[0] - y[0]) < 1e-9);
    CHECK(std::abs(inv.y[2] - y[2]) < 1e-9);
    CHECK(std::abs(inv.y[3] - y[3]) < 1e-9);
}
