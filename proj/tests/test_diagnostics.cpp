#include <catch2/catch.hpp>

#include "glwave/diagnostics.hpp"
#include "glwave/initial_data.hpp"

using namespace glwave;

namespace {

const PotentialModel QUARTIC = PotentialModel::quartic_scalar();

GridSpec grid2d(int nx, int ny, double x1lo, double x1hi, double x2lo, double x2hi) {
    GridSpec g;
    g.nd = 2;
    g.cells = {nx, ny, 1};
    g.lo = {x1lo, x2lo, 0};
    g.hi = {x1hi, x2hi, 0};
    return g;
}

// analytic rigid kink u = q((x2 - g(x1 - t))/eps), q = tanh(s/sqrt 2)
struct RigidKink {
    double eps, amp, lam;
    double g(double w) const { return amp * std::sin(2 * PI * w / lam); }
    double gp(double w) const { return amp * 2 * PI / lam * std::cos(2 * PI * w / lam); }
    double q(double s) const { return std::tanh(s / std::sqrt(2.0)); }
    double qp(double s) const {
        double c = std::cosh(s / std::sqrt(2.0));
        return 1.0 / (std::sqrt(2.0) * c * c);
    }
    FieldState sample(const GridSpec& grid, double t) const {
        FieldState s(grid, 1, eps, t);
        for (int i = 0; i < grid.cells[0]; ++i)
            for (int j = 0; j < grid.cells[1]; ++j) {
                double x1 = grid.coord(i, 0), x2 = grid.coord(j, 1);
                double z = (x2 - g(x1 - t)) / eps;
                std::size_t idx = grid.index(i, j);
                s.u[0][idx] = q(z);
                s.ut[0][idx] = qp(z) * gp(x1 - t) / eps;
            }
        return s;
    }
};

SurfaceParametrization static_plane_surface() {
    auto be = std::make_shared<AnalyticSurface>(
        2, [](double, double y1) { return Vec{y1, 0.0}; },
        [](double, double) { return Vec{0.0, 0.0}; },
        [](double, double) { return Vec{1.0, 0.0}; });
    return make_surface(be, -0.6, 0.6, 64, 13);
}

}  // namespace

TEST_CASE("energy density: vacuum and the static kink line profile") {
    GridSpec g = grid2d(64, 64, 0, 1, -0.5, 0.5);
    FieldState vac(g, 1, 0.1);
    for (auto& v : vac.u[0]) v = -1.0;
    auto e = energy_density(vac, QUARTIC);
    for (double v : e) CHECK(v == 0.0);

    // static kink: e_eps along normal lines matches the 1-D oracle within 1%
    double eps = 0.05;
    GridSpec g2 = grid2d(32, 256, 0, 1, -0.5, 0.5);
    RigidKink rk{eps, 0.0, 1.0};
    FieldState s = rk.sample(g2, 0.0);
    auto e2 = energy_density(s, QUARTIC);
    for (int j = 60; j < 200; j += 7) {
        double x2 = g2.coord(j, 1);
        double oracle =
            (0.5 * rk.qp(x2 / eps) * rk.qp(x2 / eps) + QUARTIC.F1(rk.q(x2 / eps))) / (eps * eps);
        double got = e2[g2.index(5, j)];
        CHECK(got == Approx(oracle).margin(0.01 * std::max(1.0, oracle)));
    }

    // delta_eps-normalized transverse integral of e is 1 (kappa1 oracle);
    // skip the two wrap rows whose gradient stencils straddle the +-1 jump
    double kappa1 = surface_tension(QUARTIC).kappa1;
    double acc = 0;
    for (int j = 1; j < 255; ++j) acc += e2[g2.index(5, j)] * g2.spacing(1);
    CHECK(delta_eps(1, eps, kappa1) * acc == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("emt field matches the rigid-kink matrix nodewise") {
    double eps = 0.05;
    RigidKink rk{eps, 0.06, 1.0};
    auto worst_err = [&](int ny) {
        GridSpec g = grid2d(ny, ny, 0, 1, -0.5, 0.5);
        FieldState s = rk.sample(g, 0.13);
        double worst = 0;
        for (int i = 3; i < ny; i += ny / 11)
            for (int j = ny / 2 - ny / 8; j < ny / 2 + ny / 8; j += 3) {
                Mat T = emt_at(s, i, j, 0, QUARTIC);
                double x1 = g.coord(i, 0), x2 = g.coord(j, 1);
                double z = (x2 - rk.g(x1 - 0.13)) / eps;
                double qp = rk.qp(z), gp = rk.gp(x1 - 0.13);
                double pref = qp * qp / (eps * eps);
                Mat X(3, 3);
                X(0, 0) = pref * (1 + gp * gp);
                X(0, 1) = -pref * gp * gp;
                X(0, 2) = pref * gp;
                X(1, 0) = pref * gp * gp;
                X(1, 1) = pref * (1 - gp * gp);
                X(1, 2) = pref * gp;
                X(2, 0) = -pref * gp;
                X(2, 1) = pref * gp;
                X(2, 2) = 0.0;
                double scale = std::max(1.0, pref);
                worst = std::max(worst, max_abs(T - X) / scale);
            }
        return worst;
    };
    double e256 = worst_err(256), e512 = worst_err(512);
    CHECK(e256 < 0.05);
    CHECK(e256 / e512 == Approx(4.0).epsilon(0.35));  // O(h^2)

    // T^0_0 equals the energy density identically
    GridSpec g = grid2d(128, 128, 0, 1, -0.5, 0.5);
    FieldState s = rk.sample(g, 0.0);
    auto e = energy_density(s, QUARTIC);
    for (int i = 0; i < 128; i += 31)
        for (int j = 0; j < 128; j += 17) {
            Mat T = emt_at(s, i, j, 0, QUARTIC);
            CHECK(T(0, 0) == Approx(e[g.index(i, j)]).margin(1e-12));
        }
}

TEST_CASE("emt divergence decays at second order on an exact solution") {
    double eps = 0.1;
    RigidKink rk{eps, 0.04, 1.0};
    auto resid = [&](int n) {
        GridSpec g = grid2d(n, n, 0, 1, -0.5, 0.5);
        double hdt = 0.25 * g.spacing(0);
        FieldState sm = rk.sample(g, 0.2 - hdt), s0 = rk.sample(g, 0.2),
                   sp = rk.sample(g, 0.2 + hdt);
        double worst = 0;
        for (int i = 4; i < n; i += n / 7)
            for (int j = n / 2 - n / 10; j < n / 2 + n / 10; j += 5) {
                Mat Tm = emt_at(sm, i, j, 0, QUARTIC);
                Mat Tp = emt_at(sp, i, j, 0, QUARTIC);
                Vec div = emt_spatial_divergence(s0, i, j, 0, QUARTIC);
                for (int be = 0; be < 3; ++be) {
                    double tot = (Tp(0, be) - Tm(0, be)) / (2 * hdt) + div[be];
                    worst = std::max(worst, std::abs(tot) * eps * eps * eps);
                }
            }
        return worst;
    };
    double r128 = resid(128), r256 = resid(256);
    CHECK(r128 / r256 == Approx(4.0).epsilon(0.4));
}

TEST_CASE("pullback of the static kink through the plane chart") {
    SurfaceParametrization plane = static_plane_surface();
    auto fr = normal_frame(plane, 1);
    TubularChart chart = build_chart(plane, fr, 0.3, 0.5);

    double eps = 0.05;
    RigidKink rk{eps, 0.0, 1.0};
    GridSpec g = grid2d(64, 256, 0, 1, -0.5, 0.5);
    SpacetimeField field(QUARTIC);
    field.push(rk.sample(g, -0.02));
    field.push(rk.sample(g, 0.0));
    field.push(rk.sample(g, 0.02));

    PulledBackField v = pullback_slice(field, chart, 0.0, 0.28, 48, 97);
    // v(y) = q(y^N/eps), independent of y^0, y^1
    for (int i1 = 0; i1 < v.m1; i1 += 7)
        for (int c = 3; c < v.mnu; c += 11) {
            std::size_t idx = static_cast<std::size_t>(i1) * v.mnu + c;
            CHECK(v.v[0][idx] == Approx(rk.q(v.nu_coord(c) / eps)).margin(2e-4));
            CHECK(std::abs(v.v_y0[0][idx]) < 1e-3);
            CHECK(std::abs(v.v_y1[0][idx]) < 1e-3);
        }

    // chain rule consistency: v_nu vs direct finite differences of v
    double dn = v.dnu();
    double worst = 0;
    for (int i1 = 0; i1 < v.m1; i1 += 5)
        for (int c = 2; c + 2 < v.mnu; c += 5) {
            std::size_t idx = static_cast<std::size_t>(i1) * v.mnu + c;
            double fd = (v.v[0][idx + 1] - v.v[0][idx - 1]) / (2 * dn);
            worst = std::max(worst, std::abs(fd - v.v_nu[0][0][idx]) / (1.0 / eps));
        }
    CHECK(worst < (dn / eps) * (dn / eps) * 2.0);  // O(h^2) in profile scale

    // identity chart and static data: e(v;G) coincides with e_nu
    SliceEnergies en = transformed_energy(v, QUARTIC);
    for (int i1 = 0; i1 < v.m1; i1 += 11)
        for (int c = 5; c < v.mnu; c += 13) {
            std::size_t idx = static_cast<std::size_t>(i1) * v.mnu + c;
            CHECK(en.e_G[idx] == Approx(en.e_nu[idx]).margin(1e-4 * std::max(1.0, en.e_nu[idx])));
        }
}

TEST_CASE("defect confinement (k=1): oracle agreement and displacement growth") {
    KinkProfile kp = solve_kink(QUARTIC);
    double eps = 0.05, rho = 0.5;
    TruncatedProfile qt = truncate_kink(kp, 1.2, eps);

    auto slice_for = [&](double a) {
        PulledBackField f;
        f.k = 1;
        f.m1 = 4;
        f.mnu = 401;
        f.nu_extent = rho;
        f.eps = eps;
        f.v[0].assign(static_cast<std::size_t>(f.m1) * f.mnu, 0.0);
        f.v_y0[0].assign(f.v[0].size(), 0.0);
        f.v_y1[0].assign(f.v[0].size(), 0.0);
        f.v_nu[0][0].assign(f.v[0].size(), 0.0);
        for (int i1 = 0; i1 < f.m1; ++i1)
            for (int c = 0; c < f.mnu; ++c)
                f.v[0][static_cast<std::size_t>(i1) * f.mnu + c] =
                    qt.at_distance(f.nu_coord(c) - a);
        return f;
    };

    auto oracle = [&](double a) {
        auto integrand = [&](double y) {
            double sgn = y >= 0 ? 1.0 : -1.0;
            double d = qt.at_distance(y - a) - sgn;
            return std::abs(y) * d * d;
        };
        return integrate(integrand, -rho, rho, 1e-12).value;
    };

    {
        PulledBackField f = slice_for(0.0);
        for (int c = 0; c < f.mnu; ++c)
            for (int i1 = 0; i1 < f.m1; ++i1)
                f.v[0][static_cast<std::size_t>(i1) * f.mnu + c] =
                    f.nu_coord(c) >= 0 ? 1.0 : -1.0;
        CHECK(defect_confinement_scalar(f, rho) == Approx(0.0).margin(1e-12));
    }

    double d0 = defect_confinement_scalar(slice_for(0.0), rho);
    CHECK(d0 == Approx(oracle(0.0)).epsilon(0.02));
    CHECK(d0 < 2.0 * eps * eps);

    for (double a : {0.05, 0.1, 0.2}) {
        double got = defect_confinement_scalar(slice_for(a), rho);
        CHECK(got == Approx(oracle(a)).epsilon(0.02));
        CHECK(got >= 0.5 * a * a * a);
    }
}

TEST_CASE("omega dictionary admissibility and zero-field value") {
    OmegaDictionary dict = make_omega_dictionary(0.4);
    CHECK(dict.elements.size() >= 4);
    CHECK(omega_dictionary_violation(dict, 120) <= 1e-3);

    PulledBackField f;
    f.k = 2;
    f.m1 = 2;
    f.mnu = 81;
    f.nu_extent = 0.4;
    f.eps = 0.05;
    std::size_t n = static_cast<std::size_t>(f.m1) * f.mnu * f.mnu;
    for (int c = 0; c < 2; ++c) {
        f.v[c].assign(n, 0.0);
        f.v_y0[c].assign(n, 0.0);
        f.v_y1[c].assign(n, 0.0);
        for (int d = 0; d < 2; ++d) f.v_nu[c][d].assign(n, 0.0);
    }
    double want = 0;
    for (const auto& el : dict.elements) want = std::max(want, -PI * el.value(0, 0));
    double got = defect_confinement_vector(f, dict);
    CHECK(got == Approx(want).margin(1e-10));
    CHECK(want > 0.01);
}

TEST_CASE("vortex jacobian: winding, near-delta profile, displacement growth") {
    double eps = 0.04, rho = 0.4;
    auto slice_for = [&](double ax, double ay) {
        PulledBackField f;
        f.k = 2;
        f.m1 = 2;
        f.mnu = 161;
        f.nu_extent = rho;
        f.eps = eps;
        std::size_t n = static_cast<std::size_t>(f.m1) * f.mnu * f.mnu;
        for (int c = 0; c < 2; ++c) {
            f.v[c].assign(n, 0.0);
            f.v_y0[c].assign(n, 0.0);
            f.v_y1[c].assign(n, 0.0);
            for (int d = 0; d < 2; ++d) f.v_nu[c][d].assign(n, 0.0);
        }
        for (int i1 = 0; i1 < f.m1; ++i1)
            for (int a = 0; a < f.mnu; ++a)
                for (int b = 0; b < f.mnu; ++b) {
                    Vec z{(f.nu_coord(a) - ax) / eps, (f.nu_coord(b) - ay) / eps};
                    Vec u = vortex_profile(z);
                    std::size_t idx =
                        (static_cast<std::size_t>(i1) * f.mnu + a) * f.mnu + b;
                    f.v[0][idx] = u[0];
                    f.v[1][idx] = u[1];
                }
        return f;
    };

    PulledBackField f0 = slice_for(0.0, 0.0);
    JacobianField jf = jacobian_field(f0);
    CHECK(jf.per_slice_integral[0] == Approx(PI).epsilon(0.02));

    {
        int mid = f0.mnu / 2;
        std::size_t at_core = (0 * f0.mnu + mid) * static_cast<std::size_t>(f0.mnu) + mid;
        CHECK(jf.J[at_core] == Approx(1.0 / (eps * eps)).epsilon(0.1));
        int far = mid + static_cast<int>(3 * eps / f0.dnu());
        std::size_t idx_far = (0 * f0.mnu + far) * static_cast<std::size_t>(f0.mnu) + far;
        CHECK(std::abs(jf.J[idx_far]) < 0.05 / (eps * eps));
    }

    OmegaDictionary dict = make_omega_dictionary(rho);
    double centered = defect_confinement_vector(f0, dict);
    CHECK(centered < 5e-3);

    std::vector<double> as = {0.05, 0.1, 0.2}, ds;
    for (double a : as) ds.push_back(defect_confinement_vector(slice_for(a, 0.0), dict));
    for (double d : ds) CHECK(d > 0);
    auto fit = loglog_slope(as, ds);
    CHECK(fit.slope == Approx(3.0).margin(0.6));
    CHECK(ds[0] < ds[1]);
    CHECK(ds[1] < ds[2]);

    OmegaDictionary bigger = dict;
    for (const auto& el : dict.elements) bigger.elements.push_back(el);
    CHECK(defect_confinement_vector(slice_for(0.1, 0.0), bigger) >=
          defect_confinement_vector(slice_for(0.1, 0.0), dict) - 1e-14);
}

TEST_CASE("zeta rows of the static kink in the plane chart") {
    SurfaceParametrization plane = static_plane_surface();
    auto fr = normal_frame(plane, 1);
    TubularChart chart = build_chart(plane, fr, 0.3, 0.5);
    ChartConstants cc = cone_slope(chart);

    double eps = 0.05;
    RigidKink rk{eps, 0.0, 1.0};
    GridSpec g = grid2d(64, 256, 0, 1, -0.5, 0.5);
    SpacetimeField field(QUARTIC);
    for (double t : {-0.04, -0.02, 0.0, 0.02, 0.04}) field.push(rk.sample(g, t));

    double kappa1 = surface_tension(QUARTIC).kappa1;
    double delta = delta_eps(1, eps, kappa1);
    double rho1 = 0.25;
    for (double s : {0.0, 0.02}) {
        double w = rho1 - cc.c_star * s;
        PulledBackField v = pullback_slice(field, chart, s, w, 48, 129);
        ZetaRow row = zeta_row(v, QUARTIC, delta, rho1, cc.c_star, cc.kappa2, nullptr, 0.1, 0.25);
        CHECK(std::abs(row.zeta1) < 5e-3);
        CHECK(row.zeta3 < 5e-3);
        CHECK(row.zeta2 < 2 * eps * eps);
        CHECK(row.bad_measure == 0.0);
        CHECK(row.min_good_energy > 1.0 - 1e-3);
        CHECK(row.equip_good < 1e-3);
    }
}

TEST_CASE("track defect: static kink line and circle radius") {
    // kink/antikink pair at x2 = -+0.25: consistent with the periodic wrap
    double eps = 0.05;
    GridSpec g = grid2d(64, 256, 0, 1, -0.5, 0.5);
    FieldState s(g, 1, eps);
    for (int i = 0; i < 64; ++i)
        for (int j = 0; j < 256; ++j) {
            double x2 = g.coord(j, 1);
            double v = x2 <= 0 ? std::tanh((x2 + 0.25) / (eps * std::sqrt(2.0)))
                               : std::tanh((0.25 - x2) / (eps * std::sqrt(2.0)));
            s.u[0][g.index(i, j)] = v;
        }
    auto pts = track_defect_scalar(s);
    REQUIRE(!pts.empty());
    for (const auto& p : pts)
        CHECK(std::min(std::abs(p[1] + 0.25), std::abs(p[1] - 0.25)) <= g.spacing(1) / 2);

    GridSpec gc = grid2d(128, 128, -1.0, 1.0, -1.0, 1.0);
    FieldState sc(gc, 1, 0.0625);
    double R = 0.6;
    for (int i = 0; i < 128; ++i)
        for (int j = 0; j < 128; ++j) {
            double x = gc.coord(i, 0), y = gc.coord(j, 1);
            sc.u[0][gc.index(i, j)] = std::tanh((std::hypot(x, y) - R) / (0.0625 * std::sqrt(2.0)));
        }
    auto loc = track_defect_scalar(sc);
    auto stat = radius_of_locus(loc, 0.0, 0.0);
    CHECK(stat.mean == Approx(R).margin(2 * gc.spacing(0)));
}

TEST_CASE("vortex tracking with a windowed jacobian moment") {
    GridSpec g;
    g.nd = 3;
    g.cells = {8, 96, 96};
    g.lo = {0, -0.75, -0.75};
    g.hi = {1, 0.75, 0.75};
    double eps = 0.0625;
    VortexLineScenario sc;
    sc.core = {-0.3, 0.1};
    sc.anticore = {0.45, 0.1};
    sc.g = [](double) { return Vec{0.0, 0.0}; };
    sc.gp = [](double) { return Vec{0.0, 0.0}; };
    FieldState s = prepare_vector_data(g, eps, sc);
    VortexTrack tr = track_defect_vortex(
        s, [&](double, double& x, double& y) { x = -0.3; y = 0.1; }, 0.3);
    for (std::size_t i = 0; i < tr.x1.size(); ++i) {
        REQUIRE(tr.found[i]);
        CHECK(tr.cx[i] == Approx(-0.3).margin(0.02));
        CHECK(tr.cy[i] == Approx(0.1).margin(0.02));
    }
}

TEST_CASE("emt gap: surface against itself vanishes, field probes accumulate") {
    auto be = std::make_shared<AnalyticSurface>(
        2, [](double, double y1) { return Vec{y1, 0.0}; },
        [](double, double) { return Vec{0.0, 0.0}; },
        [](double, double) { return Vec{1.0, 0.0}; });
    SurfaceParametrization plane = make_surface(be, 0.05, 0.45, 64, 9);
    SurfaceEMT emt = surface_tensor(plane);
    GridSpec g = grid2d(64, 256, 0, 1, -0.5, 0.5);
    auto dict = default_tensor_dictionary(0.1, 0.4, g);
    EmtGapProbe probe(dict, QUARTIC, 1.0, 3);
    probe.set_surface(emt);
    EmtGapProbe probe2(dict, QUARTIC, 1.0, 3);
    probe2.set_surface(emt);
    CHECK(probe.estimate_against_field(probe2, 1.0).gap == 0.0);

    double eps = 0.05;
    RigidKink rk{eps, 0.0, 1.0};
    double kappa1 = surface_tension(QUARTIC).kappa1;
    EmtGapProbe fp(dict, QUARTIC, delta_eps(1, eps, kappa1), 3);
    fp.set_surface(emt);
    int nt = 13;
    double t0 = 0.05, t1 = 0.45;
    for (int i = 0; i < nt; ++i) {
        double t = t0 + (t1 - t0) * i / (nt - 1);
        double w = (i == 0 || i == nt - 1) ? 0.5 : 1.0;
        fp.feed(rk.sample(g, t), w * (t1 - t0) / (nt - 1));
    }
    DualNormEstimate est = fp.estimate();
    CHECK(est.lower_bound);
    CHECK(est.gap < 0.05);
    CHECK(est.dictionary_size == static_cast<int>(dict.size()) * 9);
}
