#include <catch2/catch.hpp>

#include "glwave/solver.hpp"

using namespace glwave;

namespace {

// Exact periodic solution on the unit-height strip: a kink/antikink train
// u(t,x) = A sn((x2 - g(x1 - t))/(eps B), m) with A^2 = 2m/(1+m),
// B = sqrt(1+m), and the parameter m tuned so one sn period fills the
// periodic height exactly.
struct SnTrain {
    double eps, m, A, B, amp, lam;
    double height;

    static SnTrain make(double eps, double height, double amp, double lam) {
        SnTrain s;
        s.eps = eps;
        s.height = height;
        s.amp = amp;
        s.lam = lam;
        // solve 4 K(m) sqrt(1+m) = height / eps
        double target = height / eps;
        require(target > 2 * PI + 1e-6, "SnTrain: eps too large for the box height");
        double lo = 1e-12, hi = 1 - 1e-14;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            double val = 4 * ellint_K(mid) * std::sqrt(1 + mid);
            (val < target ? lo : hi) = mid;
        }
        s.m = 0.5 * (lo + hi);
        s.A = std::sqrt(2 * s.m / (1 + s.m));
        s.B = std::sqrt(1 + s.m);
        return s;
    }
    double g(double w) const { return amp * std::sin(2 * PI * w / lam); }
    double gp(double w) const { return amp * 2 * PI / lam * std::cos(2 * PI * w / lam); }
    double value(double t, double x1, double x2) const {
        double z = (x2 - g(x1 - t)) / (eps * B);
        return A * jacobi_sn(z, m);
    }
    double ut(double t, double x1, double x2) const {
        double z = (x2 - g(x1 - t)) / (eps * B);
        auto e = jacobi_elliptic(z, m);
        return A * e.cn * e.dn * gp(x1 - t) / (eps * B);
    }
    FieldState sample(const GridSpec& grid, double t) const {
        FieldState s(grid, 1, eps, t);
        for (int i = 0; i < grid.cells[0]; ++i)
            for (int j = 0; j < grid.cells[1]; ++j) {
                std::size_t idx = grid.index(i, j);
                s.u[0][idx] = value(t, grid.coord(i, 0), grid.coord(j, 1));
                s.ut[0][idx] = ut(t, grid.coord(i, 0), grid.coord(j, 1));
            }
        return s;
    }
};

GridSpec square_grid(int n, double x2lo = -0.5, double x2hi = 0.5) {
    GridSpec g;
    g.nd = 2;
    g.cells = {n, n, 1};
    g.lo = {0.0, x2lo, 0.0};
    g.hi = {1.0, x2hi, 0.0};
    return g;
}

double l2_diff(const FieldState& a, const FieldState& b) {
    double acc = 0, ref = 0;
    for (std::size_t i = 0; i < a.u[0].size(); ++i) {
        double d = a.u[0][i] - b.u[0][i];
        acc += d * d;
        ref += b.u[0][i] * b.u[0][i];
    }
    return std::sqrt(acc / std::max(ref, 1e-300));
}

}  // namespace

TEST_CASE("sn train is an exact solution (residual check)") {
    SnTrain ex = SnTrain::make(0.1, 1.0, 0.05, 1.0);
    // substitute into u_tt - Lap u + f(u)/eps^2 with finite differences
    double h = 1e-4;
    for (double t : {0.0, 0.3})
        for (double x1 : {0.2, 0.7})
            for (double x2 : {-0.2, 0.0, 0.31}) {
                auto at = [&](double tt, double a, double b) { return ex.value(tt, a, b); };
                double utt = (at(t + h, x1, x2) - 2 * at(t, x1, x2) + at(t - h, x1, x2)) / (h * h);
                double lap = (at(t, x1 + h, x2) - 2 * at(t, x1, x2) + at(t, x1 - h, x2)) / (h * h) +
                             (at(t, x1, x2 + h) - 2 * at(t, x1, x2) + at(t, x1, x2 - h)) / (h * h);
                double u = at(t, x1, x2);
                double resid = utt - lap + (u * u - 1) * u / (ex.eps * ex.eps);
                CHECK(std::abs(resid) < 2e-3);  // FD floor ~ |u''''| h^2
            }
    // ... and is exactly periodic across the box height
    CHECK(ex.value(0.1, 0.3, -0.5) == Approx(ex.value(0.1, 0.3, 0.5)).margin(1e-12));
}

TEST_CASE("vacuum is a fixed point") {
    GridSpec g = square_grid(32);
    FieldState s(g, 1, 0.15);
    for (auto& v : s.u[0]) v = 1.0;
    SolverConfig cfg;
    cfg.t_end = 0.2;
    cfg.snapshot_cadence = 0.1;
    Trajectory tr = run(s, cfg);
    const FieldState& last = tr.snapshots.back();
    for (double v : last.u[0]) CHECK(v == Approx(1.0).margin(1e-13));
    for (double e : tr.energy_ledger) CHECK(std::abs(e) < 1e-20);
}

TEST_CASE("zero run time returns only the initial snapshot") {
    GridSpec g = square_grid(32);
    FieldState s(g, 1, 0.2);
    SolverConfig cfg;
    cfg.t_end = 0.0;
    Trajectory tr = run(s, cfg);
    CHECK(tr.snapshots.size() == 1);
}

TEST_CASE("energy ledger has one entry per step plus the initial one") {
    GridSpec g = square_grid(32);
    SnTrain ex = SnTrain::make(0.15, 1.0, 0.03, 1.0);
    FieldState s = ex.sample(g, 0.0);
    SolverConfig cfg;
    cfg.t_end = 0.05;
    cfg.snapshot_cadence = 0.025;
    Trajectory tr = run(s, cfg);
    CHECK(tr.energy_ledger.size() == static_cast<std::size_t>(tr.steps) + 1);
}

TEST_CASE("rerun with the same config is bit identical") {
    GridSpec g = square_grid(48);
    SnTrain ex = SnTrain::make(0.12, 1.0, 0.04, 1.0);
    FieldState s = ex.sample(g, 0.0);
    SolverConfig cfg;
    cfg.t_end = 0.1;
    cfg.snapshot_cadence = 0.05;
    cfg.threads = 2;
    Trajectory a = run(s, cfg);
    Trajectory b = run(s, cfg);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t i = 0; i < a.snapshots.back().u[0].size(); ++i)
        REQUIRE(a.snapshots.back().u[0][i] == b.snapshots.back().u[0][i]);
    for (std::size_t i = 0; i < a.energy_ledger.size(); ++i)
        REQUIRE(a.energy_ledger[i] == b.energy_ledger[i]);
}

TEST_CASE("linear plane wave advects with O(h^2) dispersion error") {
    auto free_wave = [](int n) {
        GridSpec g = square_grid(n);
        FieldState s(g, 1, 1.0);  // eps irrelevant at F = 0
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x = g.coord(i, 0);
                s.u[0][g.index(i, j)] = std::sin(2 * PI * x);
                s.ut[0][g.index(i, j)] = -2 * PI * std::cos(2 * PI * x);
            }
        SolverConfig cfg;
        cfg.potential = PotentialModel::quartic_scalar(0.0);
        cfg.t_end = 1.0;
        cfg.snapshot_cadence = 0.5;
        Trajectory tr = run(s, cfg);
        const FieldState& last = tr.snapshots.back();
        double err = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x = g.coord(i, 0);
                err = std::max(err, std::abs(last.u[0][g.index(i, j)] -
                                             std::sin(2 * PI * (x - 1.0))));
            }
        return err;
    };
    double e64 = free_wave(64), e128 = free_wave(128);
    CHECK(e64 < 0.02);
    CHECK(e64 / e128 == Approx(4.0).epsilon(0.25));
}

TEST_CASE("rigid kink train reproduced with second-order accuracy") {
    SnTrain ex = SnTrain::make(0.1, 1.0, 0.05, 1.0);
    auto solve_err = [&](int n) {
        GridSpec g = square_grid(n);
        FieldState s = ex.sample(g, 0.0);
        SolverConfig cfg;
        cfg.t_end = 0.5;
        cfg.snapshot_cadence = 0.25;
        cfg.threads = 2;
        Trajectory tr = run(s, cfg);
        return l2_diff(tr.snapshots.back(), ex.sample(g, 0.5));
    };
    double e128 = solve_err(128);
    double e256 = solve_err(256);
    CHECK(e128 < 5e-3);
    CHECK(e128 / e256 == Approx(4.0).epsilon(0.20));
}

TEST_CASE("energy drift stays below 1e-4 per unit time at CFL 0.5") {
    SnTrain ex = SnTrain::make(0.1, 1.0, 0.05, 1.0);
    GridSpec g = square_grid(192);
    FieldState s = ex.sample(g, 0.0);
    SolverConfig cfg;
    cfg.t_end = 0.5;
    cfg.snapshot_cadence = 0.25;
    cfg.threads = 2;
    Trajectory tr = run(s, cfg);
    double e0 = tr.energy_ledger[1];  // first centered entry
    double worst = 0;
    for (std::size_t i = 1; i < tr.energy_ledger.size(); ++i)
        worst = std::max(worst, std::abs(tr.energy_ledger[i] - e0) / e0);
    CHECK(worst / cfg.t_end <= 1e-4);
}

TEST_CASE("time reversal returns to the initial state") {
    SnTrain ex = SnTrain::make(0.12, 1.0, 0.04, 1.0);
    GridSpec g = square_grid(64);
    FieldState s = ex.sample(g, 0.0);
    SolverConfig cfg;
    cfg.t_end = 1.0;
    LeapfrogStepper st(s, cfg);
    int nsteps = 200;
    for (int i = 0; i < nsteps; ++i) st.step();
    st.reverse();
    for (int i = 0; i < nsteps; ++i) st.step();
    st.reverse();  // the backward pass ends on the synthetic pre-step level
    FieldState back = st.state();
    double worst = 0;
    for (std::size_t i = 0; i < back.u[0].size(); ++i)
        worst = std::max(worst, std::abs(back.u[0][i] - s.u[0][i]));
    CHECK(worst <= 1e-10 * nsteps);
}

TEST_CASE("blow-up raises with location and step") {
    GridSpec g = square_grid(32);
    FieldState s(g, 1, 0.2);
    s.u[0][g.index(3, 4)] = 1e308;  // overflows on the first update
    SolverConfig cfg;
    cfg.t_end = 0.1;
    CHECK_THROWS_AS(run(s, cfg), BlowUpError);
}

TEST_CASE("light cone check: energy cannot escape the eroded region") {
    GridSpec g = square_grid(128);
    FieldState s(g, 1, 0.1);
    for (int i = 0; i < 128; ++i)
        for (int j = 0; j < 128; ++j) {
            double x = g.coord(i, 0) - 0.5, y = g.coord(j, 1);
            double r2 = x * x + y * y;
            s.u[0][g.index(i, j)] = 1.0 - 0.4 * std::exp(-r2 / 0.003);
            s.ut[0][g.index(i, j)] = 0.0;
        }
    SolverConfig cfg;
    cfg.t_end = 0.2;
    cfg.snapshot_cadence = 0.1;
    cfg.retain_every = 1;
    Trajectory tr = run(s, cfg);
    double etot = total_energy(s);

    Box inner;
    inner.lo = {0.2, -0.3, 0};
    inner.hi = {0.8, 0.3, 0};
    auto rep = light_cone_check(tr.snapshots.front(), tr.snapshots.back(), {inner},
                                PotentialModel::quartic_scalar(), 1e-6 * etot);
    CHECK(rep.pass);
    // a = b is trivially equal
    auto rep0 = light_cone_check(tr.snapshots.front(), tr.snapshots.front(), {inner},
                                 PotentialModel::quartic_scalar(), 1e-12, 0.0);
    CHECK(rep0.margin == Approx(0.0).margin(1e-15));

    // disturbance front speed <= 1 + 2h/(b-a): kick at a point and track the
    // radius where energy density exceeds a threshold
    FieldState kick(g, 1, 0.1);
    for (auto& v : kick.u[0]) v = 1.0;
    for (int i = 0; i < 128; ++i)
        for (int j = 0; j < 128; ++j) {
            double x = g.coord(i, 0) - 0.5, y = g.coord(j, 1);
            kick.ut[0][g.index(i, j)] = 2.0 * std::exp(-(x * x + y * y) / 5e-4);
        }
    SolverConfig cfg2;
    cfg2.t_end = 0.25;
    cfg2.snapshot_cadence = 0.25;
    Trajectory tk = run(kick, cfg2, {});
    const FieldState& lastk = tk.snapshots.back();
    double h = g.spacing(0);
    double rmax = 0;
    for (int i = 0; i < 128; ++i)
        for (int j = 0; j < 128; ++j) {
            double gvec[3];
            lastk.gradient(0, i, j, 0, gvec);
            double ut = lastk.ut[0][g.index(i, j)];
            double e = 0.5 * (ut * ut + gvec[0] * gvec[0] + gvec[1] * gvec[1]);
            if (e > 1e-8) {
                double x = g.coord(i, 0) - 0.5, y = g.coord(j, 1);
                rmax = std::max(rmax, std::sqrt(x * x + y * y) - std::sqrt(5e-4) * 4);
            }
        }
    CHECK(rmax / 0.25 <= 1.0 + 2 * h / 0.25);
}
