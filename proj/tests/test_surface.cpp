#include <catch2/catch.hpp>

#include "glwave/surface.hpp"

using namespace glwave;

namespace {

// circle of radius R at rest: x(sigma, t) = R cos(t/R) (cos sigma/R, sin sigma/R)
DalembertGenerators circle_generators(double R, int samples = 4096) {
    auto pos = [R](double s) { return Vec{R * std::cos(s / R), R * std::sin(s / R)}; };
    auto vel = [](double) { return Vec{0.0, 0.0}; };
    auto tan = [R](double s) { return Vec{-std::sin(s / R), std::cos(s / R)}; };
    return build_generators(2, pos, vel, tan, 2 * PI * R, Vec{0.0, 0.0}, samples);
}

// static line along x1 with unit period
DalembertGenerators line_generators(int samples = 1024) {
    auto pos = [](double s) { return Vec{s, 0.0}; };
    auto vel = [](double) { return Vec{0.0, 0.0}; };
    auto tan = [](double) { return Vec{1.0, 0.0}; };
    return build_generators(2, pos, vel, tan, 1.0, Vec{1.0, 0.0}, samples);
}

// rigid wiggle Gamma = {(t, s, g(s - t))}, g = amp sin(2 pi s)
struct Wiggle {
    double amp;
    double g(double w) const { return amp * std::sin(2 * PI * w); }
    double gp(double w) const { return amp * 2 * PI * std::cos(2 * PI * w); }
};

std::shared_ptr<AnalyticSurface> wiggle_graph_raw(const Wiggle& w) {
    // graph parametrization, NOT in the orthogonal gauge
    return std::make_shared<AnalyticSurface>(
        2, [w](double t, double y1) { return Vec{y1, w.g(y1 - t)}; },
        [w](double t, double y1) { return Vec{0.0, -w.gp(y1 - t)}; },
        [w](double t, double y1) { return Vec{1.0, w.gp(y1 - t)}; });
}

}  // namespace

TEST_CASE("static line generators produce the static plane") {
    DalembertGenerators g = line_generators();
    CHECK(g.unit_speed_residual <= 1e-8);
    for (double t : {0.0, 0.4, 1.7}) {
        Vec x = g.position(0.3, t);
        CHECK(x[0] == Approx(0.3).margin(1e-10));
        CHECK(x[1] == Approx(0.0).margin(1e-12));
        CHECK(norm(g.velocity(0.3, t)) < 1e-12);
    }
}

TEST_CASE("circle generators reproduce the closed-form collapse") {
    double R = 1.0;
    DalembertGenerators g = circle_generators(R);
    CHECK(g.unit_speed_residual <= 1e-8);
    for (double t : {0.0, 0.3, 1.0}) {
        for (double s : {0.0, 1.1, 4.0}) {
            Vec x = g.position(s, t);
            double rad = std::sqrt(x[0] * x[0] + x[1] * x[1]);
            CHECK(rad == Approx(R * std::cos(t / R)).margin(1e-8));
        }
    }
    // exact evaluation at a time: no time-stepping error
    SurfaceParametrization p = evolve_string(g, 1.0);
    CHECK(p.gauge_residual <= 1e-8);
    SurfaceJet j = p.jet(1.0, 0.25);
    CHECK(norm(j.h) == Approx(std::cos(1.0)).margin(1e-8));
    // collapse detection near t = pi R / 2
    CHECK_THROWS_AS(evolve_string(g, PI / 2), GlwError);
}

TEST_CASE("gauge orthogonality of d'Alembert surfaces is automatic") {
    DalembertGenerators g = circle_generators(1.0);
    SurfaceParametrization p = surface_from_generators(g, -0.5, 0.5);
    CHECK(p.gauge_residual <= 1e-8);
    CHECK(p.timelike_alpha > 0.5);
    // |a'|, |b'| drift: re-sampling at shifted arguments stays unit speed
    double drift = 0;
    for (double xi = 0; xi < g.period; xi += g.period / 97)
        drift = std::max(drift, std::abs(norm(g.da_at(xi + 0.77)) - 1.0));
    CHECK(drift <= 1e-8);
}

TEST_CASE("orthogonalize_gauge fixes the translating graph") {
    Wiggle w{0.02};
    auto raw_be = wiggle_graph_raw(w);
    SurfaceParametrization raw = make_surface(raw_be, -0.3, 0.3, 128, 13);
    double before = raw.gauge_residual;
    CHECK(before > 1e-3);  // O(|g'|)

    SurfaceParametrization fixed = orthogonalize_gauge(raw);
    CHECK(fixed.gauge_residual <= 1e-8);

    // slice image preserved: each reparametrized sample still lies on the
    // raw graph x2 = g(x1 - t)
    for (int i = 0; i < 32; ++i) {
        double y1 = i / 32.0;
        Vec p = fixed.jet(-0.3, y1).h;
        double d = std::abs(p[1] - w.g(p[0] - (-0.3)));
        CHECK(d < 1e-9);
    }

    // already-orthogonal input is a fixed point up to round-off
    DalembertGenerators g = circle_generators(1.0);
    SurfaceParametrization circ = surface_from_generators(g, -0.2, 0.2, 128);
    SurfaceParametrization circ2 = orthogonalize_gauge(circ);
    for (int i = 0; i < 16; ++i) {
        Vec a = circ.jet(0.1, i / 16.0).h;
        Vec b = circ2.jet(0.1, i / 16.0).h;
        CHECK(norm(a - b) < 1e-9);
    }
}

TEST_CASE("rigid wiggle reproduced exactly by generators") {
    Wiggle w{0.05};
    // gauge-compliant data: velocity projected onto the normal direction
    auto pos = [w](double s) { return Vec{s, w.g(s)}; };
    auto vel = [w](double s) {
        double gp = w.gp(s);
        double den = 1 + gp * gp;
        return Vec{gp * gp / den, -gp / den};
    };
    auto tan = [w](double s) { return Vec{1.0, w.gp(s)}; };
    DalembertGenerators g = build_generators(2, pos, vel, tan, 1.0, Vec{1.0, 0.0}, 4096);
    CHECK(g.unit_speed_residual <= 1e-8);
    // the surface {(t, s, g(s-t))} as a point set: x2 = g(x1 - t)
    for (double t : {0.0, 0.37, 0.8})
        for (double s : {0.1, 0.5, 0.93}) {
            Vec x = g.position(s, t);
            CHECK(x[1] == Approx(w.g(x[0] - t)).margin(1e-8));
        }
}

TEST_CASE("k=1 normal frame: static plane and circle") {
    // static plane in R^{2+1}: nu = (0,0,1)
    DalembertGenerators gl = line_generators();
    SurfaceParametrization plane = surface_from_generators(gl, -0.5, 0.5, 64);
    auto fr = normal_frame(plane, 1);
    Vec nu = fr->normal(0, 0.0, 0.3);
    CHECK(nu[0] == Approx(0.0).margin(1e-9));
    CHECK(nu[1] == Approx(0.0).margin(1e-9));
    CHECK(nu[2] == Approx(1.0).margin(1e-9));

    // circle: spatial part radial, boosted time component
    DalembertGenerators gc = circle_generators(1.0);
    SurfaceParametrization circ = surface_from_generators(gc, -0.4, 0.4, 256);
    auto frc = normal_frame(circ, 1, FrameOrientation::OutwardRadial);
    FrameCheck chk = check_frame(circ, *frc);
    CHECK(chk.orthonormality <= 1e-8);
    CHECK(chk.tangency <= 1e-8);
    double t = 0.3;
    Vec nuc = frc->normal(0, t, 0.2);
    Vec x = circ.jet(t, 0.2).h;
    double rad = norm(x);
    // spatial part parallel to x/|x|
    double cross = nuc[1] * x[1] / rad - nuc[2] * x[0] / rad;
    CHECK(std::abs(cross) < 1e-7);
    double vdot = std::abs(std::sin(t));  // |r'(t)|
    CHECK(std::abs(nuc[0]) == Approx(vdot / std::sqrt(1 - vdot * vdot)).margin(1e-6));
}

TEST_CASE("k=2 normal frame on a straight line in R^3") {
    auto be = std::make_shared<AnalyticSurface>(
        3, [](double, double y1) { return Vec{y1, 0.0, 0.0}; },
        [](double, double) { return Vec{0.0, 0.0, 0.0}; },
        [](double, double) { return Vec{1.0, 0.0, 0.0}; });
    SurfaceParametrization line = make_surface(be, -0.5, 0.5, 64, 9);
    auto fr = normal_frame(line, 2);
    FrameCheck chk = check_frame(line, *fr);
    CHECK(chk.orthonormality <= 1e-8);
    CHECK(chk.tangency <= 1e-8);
    // nu_1 maximizes the last coordinate
    Vec n1 = fr->normal(0, 0.0, 0.0);
    CHECK(n1[3] == Approx(1.0).margin(1e-9));
}

TEST_CASE("k=2 frame continuation on a wiggly vortex line") {
    Wiggle w{0.04};
    auto be = std::make_shared<AnalyticSurface>(
        3, [w](double t, double y1) { return Vec{y1, w.g(y1 - t), 0.3 * w.g(2 * (y1 - t))}; });
    SurfaceParametrization s = make_surface(be, -0.2, 0.2, 128, 9);
    SurfaceParametrization fixed = orthogonalize_gauge(s);
    auto fr = normal_frame(fixed, 2);
    FrameCheck chk = check_frame(fixed, *fr, 5, 48);
    CHECK(chk.orthonormality <= 1e-7);
    CHECK(chk.tangency <= 1e-7);
}

TEST_CASE("surface tensor of the static plane") {
    DalembertGenerators gl = line_generators();
    SurfaceParametrization plane = surface_from_generators(gl, -0.5, 0.5, 64);
    SurfaceEMT emt = surface_tensor(plane);
    auto s = emt.at(0.0, 0.3);
    CHECK(s.area == Approx(1.0).margin(1e-10));
    CHECK(s.V == Approx(0.0).margin(1e-12));
    // P = diag(1,1,0)
    CHECK(s.P(0, 0) == Approx(1.0).margin(1e-10));
    CHECK(s.P(1, 1) == Approx(1.0).margin(1e-10));
    CHECK(s.P(2, 2) == Approx(0.0).margin(1e-10));
    CHECK(std::abs(s.P(0, 1)) + std::abs(s.P(1, 0)) < 1e-10);
    // projection property and trace
    Mat P2 = s.P * s.P;
    CHECK(max_abs(P2 - s.P) <= 1e-10);
    CHECK(s.P(0, 0) + s.P(1, 1) + s.P(2, 2) == Approx(2.0).margin(1e-10));

    // pairing against diag(1,0,0) over one time unit: T^0_0 weight is
    // (1-V^2)^{-1/2} = 1 per unit slice measure
    double v = emt.pair([](const Vec&) {
        Mat m(3, 3);
        m(0, 0) = 1;
        return m;
    });
    CHECK(v == Approx(1.0).margin(1e-8));  // unit period line, unit time window
}

TEST_CASE("surface tensor weight is (1-V^2)^{-1/2} on the moving circle") {
    DalembertGenerators gc = circle_generators(1.0);
    double t0 = 0.4;
    SurfaceParametrization circ = surface_from_generators(gc, t0, t0, 256);
    circ.t_samples = 1;
    SurfaceEMT emt = surface_tensor(circ);
    emt.mt = 1;
    auto s = emt.at(t0, 0.1);
    double V = normal_velocity(circ, t0, 0.1);
    CHECK(V == Approx(std::abs(std::sin(t0))).margin(1e-8));
    // T^0_0 density per unit parameter = P^0_0 sqrt(-gamma); per unit slice
    // length this is (1-V^2)^{-1/2}
    double slice_len = norm(circ.jet(t0, 0.1).hs);
    CHECK(s.P(0, 0) * s.area / slice_len == Approx(1.0 / std::sqrt(1 - V * V)).margin(1e-8));
    Mat P2 = s.P * s.P;
    CHECK(max_abs(P2 - s.P) <= 1e-10);
}

TEST_CASE("first variation of the area matches the surface tensor pairing") {
    DalembertGenerators gc = circle_generators(1.0);
    SurfaceParametrization circ = surface_from_generators(gc, -0.25, 0.25, 256);
    // compactly supported vector field tau(t,x) with a smooth time bump
    auto bump = [](double s) { return s <= 0 || s >= 1 ? 0.0 : std::exp(-1 / (s * (1 - s))); };
    auto tau = [&](const Vec& x) {
        Vec out(3);
        double w = bump((x[0] + 0.25) / 0.5);
        out[1] = w * 0.3 * x[2];
        out[2] = w * (0.2 + 0.1 * x[1]);
        return out;
    };
    SurfaceEMT emt = surface_tensor(circ);
    emt.mt = 257;
    // m(alpha,beta) = d tau^beta / d x^alpha pairs with P^alpha_beta
    auto dtau = [&](const Vec& x) {
        Mat m(3, 3);
        double d = 1e-6;
        for (int al = 0; al < 3; ++al) {
            Vec xp = x, xm = x;
            xp[al] += d;
            xm[al] -= d;
            Vec tp = tau(xp), tm = tau(xm);
            for (int be = 0; be < 3; ++be) m(al, be) = (tp[be] - tm[be]) / (2 * d);
        }
        return m;
    };
    double pairing = emt.pair(dtau);
    double sigma = 1e-4;
    double dL = (perturbed_area(circ, tau, sigma, 257) - perturbed_area(circ, tau, -sigma, 257)) /
                (2 * sigma);
    CHECK(dL == Approx(pairing).margin(5e-4 * std::max(1.0, std::abs(pairing)) + 5e-6));
}

TEST_CASE("gauge-orthogonalized circle satisfies the minimal surface equations") {
    DalembertGenerators gc = circle_generators(1.0);
    SurfaceParametrization circ = surface_from_generators(gc, -0.3, 0.3, 512);
    double r = minimal_surface_residual(circ, 0.1, 64, 1e-3);
    CHECK(r < 1e-4);  // O(step^2) with a smooth closed form behind it
}

TEST_CASE("generators serialize to JSON and back") {
    DalembertGenerators g = circle_generators(1.0, 512);
    nlohmann::json j = g.to_json();
    DalembertGenerators h = DalembertGenerators::from_json(j);
    CHECK(h.period == Approx(g.period));
    for (double t : {0.0, 0.2}) {
        Vec a = g.position(1.0, t), b = h.position(1.0, t);
        CHECK(norm(a - b) < 1e-14);
    }
}

TEST_CASE("normal velocity of the rigid wiggle") {
    Wiggle w{0.05};
    auto pos = [w](double s) { return Vec{s, w.g(s)}; };
    auto vel = [w](double s) {
        double gp = w.gp(s);
        double den = 1 + gp * gp;
        return Vec{gp * gp / den, -gp / den};
    };
    auto tan = [w](double s) { return Vec{1.0, w.gp(s)}; };
    DalembertGenerators g = build_generators(2, pos, vel, tan, 1.0, Vec{1.0, 0.0}, 4096);
    SurfaceParametrization p = surface_from_generators(g, 0.0, 0.0, 256);
    p.t_samples = 1;
    // V = |g'| / sqrt(1 + g'^2) pointwise, compared at matching x1 positions
    for (double y1 : {0.05, 0.3, 0.62}) {
        Vec x = p.jet(0.0, y1).h;
        double gp = w.gp(x[0]);
        CHECK(normal_velocity(p, 0.0, y1) ==
              Approx(std::abs(gp) / std::sqrt(1 + gp * gp)).margin(1e-7));
    }
}
