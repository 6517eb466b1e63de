#pragma once

#include <complex>

#include "glwave/diagnostics.hpp"

namespace glwave {

// ---------------------------------------------------------------------------
// Single-snapshot field evaluation (cubic in space): u, u_t, grad u at an
// arbitrary point of the grid at the snapshot's own time.
// ---------------------------------------------------------------------------

struct FieldJet {
    double u[2];
    double ut[2];
    double grad[2][3];
};

inline FieldJet field_jet(const FieldState& s, const double x[3]) {
    FieldJet out{};
    const GridSpec& g = s.grid;
    for (int c = 0; c < s.k; ++c) {
        out.u[c] = interp_cubic(g, s.u[c], x);
        out.ut[c] = interp_cubic(g, s.ut[c], x);
        // interpolate centered-difference gradients
        for (int d = 0; d < g.nd; ++d) {
            double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
            xp[d] += g.spacing(d);
            xm[d] -= g.spacing(d);
            out.grad[c][d] =
                (interp_cubic(g, s.u[c], xp) - interp_cubic(g, s.u[c], xm)) / (2 * g.spacing(d));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Well-prepared scalar data: u = q~(d/eps) inside the chart slice, the
// vacuum +-1 outside, u_t = q~'(d/eps) d_t / eps.
// ---------------------------------------------------------------------------

struct PrepareScalarOptions {
    double glue_tolerance = 1e-3;  // continuity across the chart boundary
    int threads = 0;
};

inline FieldState prepare_scalar_data(const TubularChart& chart, const TruncatedProfile& prof,
                                      const GridSpec& grid,
                                      const std::function<double(const double*)>& sign_outside,
                                      PrepareScalarOptions opts = {}) {
    require(chart.k == 1, "prepare_scalar_data: k = 1 chart required");
    require(grid.min_spacing() <= prof.eps / 4 + 1e-12,
            "prepare_scalar_data: grid does not resolve eps");
    FieldState s(grid, 1, prof.eps, 0.0);
    ChartSliceClassifier classifier(chart, 0.0);
    std::size_t rows = grid.cells[0];
    std::size_t rl = grid.node_count() / rows;
    std::vector<double> glue(rows, 0.0);
    std::vector<double> reach(rows, 0.0);
    parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
        for (std::size_t r = rlo; r < rhi; ++r) {
            Vec hint;
            bool have_hint = false;
            double max_abs_d = 0, max_glue = 0;
            for (std::size_t q = 0; q < rl; ++q) {
                std::size_t i = r * rl + q;
                int id[3];
                grid.unindex(i, id);
                Vec tx(chart.dim());
                tx[0] = 0.0;
                double xv[3];
                for (int d = 0; d < grid.nd; ++d) {
                    xv[d] = grid.coord(id[d], d);
                    tx[1 + d] = xv[d];
                }
                TubularChart::InvertResult inv =
                    classifier.invert(tx, have_hint ? &hint : nullptr);
                if (inv.inside) {
                    hint = inv.y;
                    have_hint = true;
                    double d = inv.y[2];
                    max_abs_d = std::max(max_abs_d, std::abs(d));
                    Mat Dpsi = chart.dpsi(inv.y);
                    Mat Dinv = inverse(Dpsi);
                    double d_t = Dinv(2, 0);
                    s.u[0][i] = prof.at_distance(d);
                    s.ut[0][i] = prof.slope(d / prof.eps) * d_t / prof.eps;
                    if (std::abs(d) >= 0.95 * chart.rho0) {
                        double sgn = d >= 0 ? 1.0 : -1.0;
                        max_glue = std::max(max_glue, std::abs(s.u[0][i] - sgn));
                    }
                } else {
                    have_hint = false;
                    s.u[0][i] = sign_outside(xv) >= 0 ? 1.0 : -1.0;
                    s.ut[0][i] = 0.0;
                }
            }
            glue[r] = max_glue;
            reach[r] = max_abs_d;
        }
    }, opts.threads);
    double max_glue = 0, max_reach = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        max_glue = std::max(max_glue, glue[r]);
        max_reach = std::max(max_reach, reach[r]);
    }
    require(max_reach >= 0.9 * chart.rho0,
            "prepare_scalar_data: chart too thin to reach |d| = rho0 on this grid");
    require(max_glue <= opts.glue_tolerance,
            "prepare_scalar_data: discontinuity across the chart boundary (" +
                std::to_string(max_glue) + ")");
    return s;
}

// ---------------------------------------------------------------------------
// Well-prepared vector data for line topologies (periodic x1): a vortex and
// its compensating antivortex, both following the rigid profile g, give a
// field that is globally consistent on the torus.
// ---------------------------------------------------------------------------

struct VortexLineScenario {
    bool closed_loop = false;                 // loops are explicitly unsupported
    std::array<double, 2> core = {0.0, 0.0};  // transverse position of the +1 line
    std::array<double, 2> anticore = {0.5, 0.0};
    std::function<Vec(double)> g;   // transverse displacement g(x1 - t) in R^2
    std::function<Vec(double)> gp;  // derivative of g
};

// Transverse vortex-antivortex pattern with an exactly periodic phase on
// the torus: the image sum of single-core phases collapses to
//   theta(z) = sum_{|m| <= 3} arg sin(pi (z - zc - i m L3)/L2)  -  (same at za),
// which is periodic in x2 exactly and in x3 up to e^{-6 pi L3/L2}.  The
// modulus uses nearest-image distances (identically 1 beyond eps).
class VortexPairPattern {
   public:
    VortexPairPattern(const GridSpec& grid, double eps, std::array<double, 2> core,
                      std::array<double, 2> anticore)
        : lo2_(grid.lo[1]), lo3_(grid.lo[2]), L2_(grid.hi[1] - grid.lo[1]),
          L3_(grid.hi[2] - grid.lo[2]), n2_(grid.cells[1]), n3_(grid.cells[2]) {
        U_[0].resize(static_cast<std::size_t>(n2_) * n3_);
        U_[1].resize(U_[0].size());
        std::complex<double> zc(core[0], core[1]), za(anticore[0], anticore[1]);
        auto wrap = [](double v, double L) { return v - L * std::floor(v / L + 0.5); };
        auto theta_sum = [&](double x2, double x3) {
            std::complex<double> z(x2, x3);
            double th = 0;
            for (int m = -3; m <= 3; ++m) {
                std::complex<double> sh(0.0, m * L3_);
                th += std::arg(std::sin(PI * (z - zc - sh) / L2_));
                th -= std::arg(std::sin(PI * (z - za - sh) / L2_));
            }
            return th;
        };
        // A dipole on the torus carries a flux defect around the x3 cycle;
        // compensate with the energy-minimal linear background phase so
        // that e^{i theta} closes up.
        double xref = core[0] + 0.37 * L2_;
        double defect = theta_sum(xref, lo3_ + L3_) - theta_sum(xref, lo3_);
        defect -= 2 * PI * std::round(defect / (2 * PI));
        for (int j = 0; j < n2_; ++j) {
            double x2 = lo2_ + L2_ * j / n2_;
            for (int kk = 0; kk < n3_; ++kk) {
                double x3 = lo3_ + L3_ * kk / n3_;
                double theta = theta_sum(x2, x3) - defect * (x3 - lo3_) / L3_;
                double d1 = std::hypot(wrap(x2 - core[0], L2_), wrap(x3 - core[1], L3_));
                double d2 = std::hypot(wrap(x2 - anticore[0], L2_), wrap(x3 - anticore[1], L3_));
                double rho = std::min(1.0, d1 / eps) * std::min(1.0, d2 / eps);
                U_[0][idx(j, kk)] = rho * std::cos(theta);
                U_[1][idx(j, kk)] = rho * std::sin(theta);
            }
        }
    }

    // bicubic periodic sample of component c at (x2, x3)
    double sample(int c, double x2, double x3) const {
        double s2 = (x2 - lo2_) / (L2_ / n2_);
        double s3 = (x3 - lo3_) / (L3_ / n3_);
        double f2 = std::floor(s2), f3 = std::floor(s3);
        int b2 = static_cast<int>(f2), b3 = static_cast<int>(f3);
        double w2[4], w3[4];
        detail::cubic_weights(s2 - f2, w2);
        detail::cubic_weights(s3 - f3, w3);
        double acc = 0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                int j = ((b2 - 1 + a) % n2_ + n2_) % n2_;
                int kk = ((b3 - 1 + b) % n3_ + n3_) % n3_;
                acc += w2[a] * w3[b] * U_[c][idx(j, kk)];
            }
        return acc;
    }

   private:
    std::size_t idx(int j, int kk) const { return static_cast<std::size_t>(j) * n3_ + kk; }
    double lo2_, lo3_, L2_, L3_;
    int n2_, n3_;
    std::array<std::vector<double>, 2> U_;
};

inline FieldState prepare_vector_data(const GridSpec& grid, double eps,
                                      const VortexLineScenario& sc, int threads = 0) {
    require(!sc.closed_loop,
            "prepare_vector_data: closed vortex loops are not supported (no constructive "
            "global phase extension)");
    require(grid.nd == 3, "prepare_vector_data: k = 2 needs a 3-D grid");
    FieldState s(grid, 2, eps, 0.0);
    VortexPairPattern pattern(grid, eps, sc.core, sc.anticore);
    std::size_t rows = grid.cells[0];
    std::size_t rl = grid.node_count() / rows;
    parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
        for (std::size_t r = rlo; r < rhi; ++r) {
            double x1 = grid.coord(static_cast<int>(r), 0);
            Vec gg = sc.g(x1), gv = sc.gp(x1);
            bool moving = norm(gv) > 0 || norm(gg) > 0;
            double fd = 0.25 * std::min(grid.spacing(1), grid.spacing(2));
            for (std::size_t q = 0; q < rl; ++q) {
                std::size_t i = r * rl + q;
                int id[3];
                grid.unindex(i, id);
                double x2 = grid.coord(id[1], 1), x3 = grid.coord(id[2], 2);
                if (!moving) {
                    std::size_t pidx = static_cast<std::size_t>(id[1]) * grid.cells[2] + id[2];
                    (void)pidx;
                    s.u[0][i] = pattern.sample(0, x2, x3);
                    s.u[1][i] = pattern.sample(1, x2, x3);
                    s.ut[0][i] = 0.0;
                    s.ut[1][i] = 0.0;
                    continue;
                }
                double a2 = x2 - gg[0], a3 = x3 - gg[1];
                for (int c = 0; c < 2; ++c) {
                    s.u[c][i] = pattern.sample(c, a2, a3);
                    // u_t = g' . grad_perp U at the shifted point
                    double d2 = (pattern.sample(c, a2 + fd, a3) - pattern.sample(c, a2 - fd, a3)) /
                                (2 * fd);
                    double d3 = (pattern.sample(c, a2, a3 + fd) - pattern.sample(c, a2, a3 - fd)) /
                                (2 * fd);
                    s.ut[c][i] = gv[0] * d2 + gv[1] * d3;
                }
            }
        }
    }, threads);
    return s;
}

// ---------------------------------------------------------------------------
// Preparedness measurement: the four assumptions on the data, their max,
// and the standing floor (eps^2 for k=1, 1/|ln eps| for k=2).
// ---------------------------------------------------------------------------

struct PreparednessReport {
    double idata1 = 0;  // energy outside the chart image
    double idata2 = 0;  // weighted slice energy minus one
    double idata3 = 0;  // time-derivative smallness on the initial hypersurface
    double idata4 = 0;  // defect confinement of v_0
    double zeta0_raw = 0;
    double floor = 0;
    double zeta0 = 0;
};

struct MeasureOptions {
    int m1 = 96;    // tangential quadrature
    int mnu = 0;    // normal-axis quadrature (0: auto from eps)
    double kappa2 = 1.0;
    const OmegaDictionary* dict = nullptr;  // k = 2 only
    int threads = 0;
    // transverse cylinders excluded from the (idata1) mask; used to carve
    // out a compensating antivortex, which is torus-closure plumbing rather
    // than part of the prepared line
    struct Exclusion {
        double x2, x3, radius;
    };
    std::vector<Exclusion> exclude;
};

inline PreparednessReport measure_preparedness(const FieldState& state, const TubularChart& chart,
                                               const PotentialModel& model, double kappa1,
                                               MeasureOptions opts = {}) {
    require(std::abs(state.time) < 1e-12, "measure_preparedness: state must be at t = 0");
    PreparednessReport rep;
    const GridSpec& g = state.grid;
    int k = chart.k;
    double eps = state.eps;
    double delta = delta_eps(k, eps, kappa1);

    // (idata1): mask the chart image on the t=0 slice
    {
        ChartSliceClassifier classifier(chart, 0.0);
        std::size_t rows = g.cells[0];
        std::size_t rl = g.node_count() / rows;
        std::vector<double> rowsum(rows, 0.0);
        std::vector<double> e = energy_density(state, model);
        parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
            for (std::size_t r = rlo; r < rhi; ++r) {
                Vec hint;
                bool have_hint = false;
                double acc = 0;
                for (std::size_t q = 0; q < rl; ++q) {
                    std::size_t i = r * rl + q;
                    int id[3];
                    g.unindex(i, id);
                    Vec tx(chart.dim());
                    tx[0] = 0;
                    for (int d = 0; d < g.nd; ++d) tx[1 + d] = g.coord(id[d], d);
                    bool excluded = false;
                    for (const auto& ex : opts.exclude) {
                        if (g.nd < 3) break;
                        double d2 = g.axis_dist(tx[2], ex.x2, 1);
                        double d3 = g.axis_dist(tx[3], ex.x3, 2);
                        if (d2 * d2 + d3 * d3 < ex.radius * ex.radius) excluded = true;
                    }
                    if (excluded) continue;
                    auto inv = classifier.invert(tx, have_hint ? &hint : nullptr);
                    if (inv.inside) {
                        hint = inv.y;
                        have_hint = true;
                    } else {
                        have_hint = false;
                        acc += e[i];
                    }
                }
                rowsum[r] = acc * g.cell_volume();
            }
        }, opts.threads);
        rep.idata1 = delta * tree_sum(rowsum);
    }

    // quadrature grid on the initial hypersurface {y0 = b(y')}
    int mnu = opts.mnu > 0 ? opts.mnu
                           : std::max(17, 2 * static_cast<int>(std::ceil(4 * chart.rho0 / eps)) + 1);
    int m1 = opts.m1;
    auto graph = chart.initial_graph(m1, mnu);
    int cols = k == 1 ? mnu : mnu * mnu;
    double dnu = 2 * chart.rho0 / (mnu - 1);

    // pulled-back data container for idata4
    PulledBackField v0;
    v0.s = 0;
    v0.k = k;
    v0.m1 = m1;
    v0.mnu = mnu;
    v0.nu_extent = chart.rho0;
    v0.eps = eps;
    std::size_t total = static_cast<std::size_t>(m1) * cols;
    for (int c = 0; c < k; ++c) {
        v0.v[c].assign(total, k == 1 ? 1.0 : 0.0);
        v0.v_y0[c].assign(total, 0.0);
        v0.v_y1[c].assign(total, 0.0);
        for (int d = 0; d < k; ++d) v0.v_nu[c][d].assign(total, 0.0);
    }

    std::vector<double> i2_rows(m1, 0.0), i3_rows(m1, 0.0);
    int n1 = chart.dim();
    parallel_for(m1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i1 = lo; i1 < hi; ++i1) {
            double y1 = static_cast<double>(i1) / m1;
            double acc2 = 0, acc3 = 0;
            for (int c = 0; c < cols; ++c) {
                double b = graph.b[i1 * cols + c];
                Vec y(n1);
                y[0] = b;
                y[1] = y1;
                if (k == 1) {
                    y[2] = graph.nu_axis[c];
                } else {
                    y[2] = graph.nu_axis[c / mnu];
                    y[3] = graph.nu_axis[c % mnu];
                    double r2 = y[2] * y[2] + y[3] * y[3];
                    if (r2 > chart.rho0 * chart.rho0) continue;
                }
                ChartJet cj = chart.jet(b, y1);
                Vec tx = chart.psi(cj, y);
                require(std::abs(tx[0]) < 1e-7, "measure_preparedness: psi^0(b, y') != 0");
                Mat D = chart.dpsi(cj, y);
                double xv[3] = {tx[1], n1 > 2 ? tx[2] : 0.0, n1 > 3 ? tx[3] : 0.0};
                FieldJet jet = field_jet(state, xv);

                // chain rule v_{y^al} = u_{x^be} psi^be_{y^al}
                double vy[2][4];
                for (int comp = 0; comp < k; ++comp)
                    for (int al = 0; al < n1; ++al) {
                        double a = jet.ut[comp] * D(0, al);
                        for (int d = 1; d < n1; ++d) a += jet.grad[comp][d - 1] * D(d, al);
                        vy[comp][al] = a;
                    }
                std::size_t idx = i1 * cols + c;
                for (int comp = 0; comp < k; ++comp) {
                    v0.v[comp][idx] = jet.u[comp];
                    v0.v_y0[comp][idx] = vy[comp][0];
                    v0.v_y1[comp][idx] = vy[comp][1];
                    for (int d = 0; d < k; ++d) v0.v_nu[comp][d][idx] = vy[comp][2 + d];
                }

                // metric at the hypersurface point
                Mat G(n1, n1);
                for (int a2 = 0; a2 < n1; ++a2)
                    for (int b2 = a2; b2 < n1; ++b2) {
                        double acc = -D(0, a2) * D(0, b2);
                        for (int r = 1; r < n1; ++r) acc += D(r, a2) * D(r, b2);
                        G(a2, b2) = acc;
                        G(b2, a2) = acc;
                    }
                Mat Gi = inverse(G);
                double r2 = 0;
                for (int d = 2; d < n1; ++d) r2 += y[d] * y[d];
                double quad = 0, val[2] = {0, 0}, vy0n = 0, vnun = 0;
                for (int comp = 0; comp < k; ++comp) {
                    val[comp] = jet.u[comp];
                    quad += -Gi(0, 0) * vy[comp][0] * vy[comp][0];
                    quad += Gi(1, 1) * vy[comp][1] * vy[comp][1];
                    for (int d = 2; d < n1; ++d)
                        for (int d2 = 2; d2 < n1; ++d2)
                            quad += Gi(d, d2) * vy[comp][d] * vy[comp][d2];
                    for (int d = 2; d < n1; ++d) quad += 2 * Gi(1, d) * vy[comp][1] * vy[comp][d];
                    vy0n += vy[comp][0] * vy[comp][0];
                    for (int d = 2; d < n1; ++d) vnun += vy[comp][d] * vy[comp][d];
                }
                double eG = 0.5 * quad + model.F(val) / (eps * eps);
                double cell = k == 1 ? dnu : dnu * dnu;
                double wq = 1.0;
                if (k == 1 && (c == 0 || c == mnu - 1)) wq = 0.5;
                acc2 += wq * (1 + opts.kappa2 * r2) * eG * cell;
                acc3 += wq * (vy0n + std::sqrt(vy0n) * std::sqrt(vnun)) * cell;
            }
            i2_rows[i1] = acc2;
            i3_rows[i1] = acc3;
        }
    }, opts.threads);
    rep.idata2 = delta * tree_sum(i2_rows) / m1 - 1.0;
    rep.idata3 = delta * tree_sum(i3_rows) / m1;

    if (k == 1) {
        rep.idata4 = defect_confinement_scalar(v0, chart.rho0);
    } else {
        require(opts.dict != nullptr, "measure_preparedness: k = 2 needs an omega dictionary");
        rep.idata4 = defect_confinement_vector(v0, *opts.dict);
    }

    rep.zeta0_raw =
        std::max(std::max(rep.idata1, rep.idata2), std::max(rep.idata3, rep.idata4));
    rep.floor = k == 1 ? eps * eps : 1.0 / std::abs(std::log(eps));
    rep.zeta0 = std::max(rep.zeta0_raw, rep.floor);
    return rep;
}

}  // namespace glwave
