#pragma once

#include <deque>
#include <map>

#include "glwave/chart.hpp"
#include "glwave/profiles.hpp"
#include "glwave/solver.hpp"

namespace glwave {

// ---------------------------------------------------------------------------
// Nodewise energy density e_eps(u; eta).
// ---------------------------------------------------------------------------

inline std::vector<double> energy_density(const FieldState& s, const PotentialModel& model) {
    const GridSpec& g = s.grid;
    std::vector<double> e(g.node_count());
    parallel_for(g.node_count(), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            int id[3];
            g.unindex(i, id);
            double grad2 = 0, kin = 0;
            double val[2];
            for (int c = 0; c < s.k; ++c) {
                double gv[3];
                s.gradient(c, id[0], id[1], id[2], gv);
                for (int d = 0; d < g.nd; ++d) grad2 += gv[d] * gv[d];
                kin += 0.5 * s.ut[c][i] * s.ut[c][i];
                val[c] = s.u[c][i];
            }
            e[i] = kin + 0.5 * grad2 + model.F(val) / (s.eps * s.eps);
        }
    });
    return e;
}

// ---------------------------------------------------------------------------
// Energy-momentum tensor of the field,
//   T^a_b = delta^a_b (eta^{cd} u_c . u_d / 2 + F/eps^2) - eta^{ac} u_c . u_b.
// ---------------------------------------------------------------------------

inline Mat emt_at(const FieldState& s, int i, int j, int kk, const PotentialModel& model,
                  bool fourth_order = false) {
    const GridSpec& g = s.grid;
    int n1 = g.nd + 1;
    // Du(c, alpha): alpha = 0 is u_t
    double Du[2][4];
    double val[2];
    std::size_t idx = g.index(i, j, kk);
    for (int c = 0; c < s.k; ++c) {
        double gv[3];
        s.gradient(c, i, j, kk, gv, fourth_order);
        Du[c][0] = s.ut[c][idx];
        for (int d = 0; d < g.nd; ++d) Du[c][d + 1] = gv[d];
        val[c] = s.u[c][idx];
    }
    double lag = 0;  // eta^{cd} u_c . u_d / 2 + F/eps^2
    for (int c = 0; c < s.k; ++c) {
        lag -= 0.5 * Du[c][0] * Du[c][0];
        for (int d = 1; d < n1; ++d) lag += 0.5 * Du[c][d] * Du[c][d];
    }
    lag += model.F(val) / (s.eps * s.eps);
    Mat T(n1, n1);
    for (int al = 0; al < n1; ++al)
        for (int be = 0; be < n1; ++be) {
            double v = al == be ? lag : 0.0;
            double sgn = al == 0 ? -1.0 : 1.0;
            for (int c = 0; c < s.k; ++c) v -= sgn * Du[c][al] * Du[c][be];
            T(al, be) = v;
        }
    return T;
}

// Discrete divergence d_alpha T^alpha_beta at a node, centered in space and
// one-sided unavailable in time (time column must be supplied by the caller
// via two bracketing snapshots).
inline Vec emt_spatial_divergence(const FieldState& s, int i, int j, int kk,
                                  const PotentialModel& model) {
    const GridSpec& g = s.grid;
    int n1 = g.nd + 1;
    Vec div(n1);
    int id[3] = {i, j, kk};
    for (int d = 0; d < g.nd; ++d) {
        int ip[3] = {id[0], id[1], id[2]}, im[3] = {id[0], id[1], id[2]};
        ip[d] += 1;
        im[d] -= 1;
        Mat Tp = emt_at(s, ip[0], ip[1], ip[2], model);
        Mat Tm = emt_at(s, im[0], im[1], im[2], model);
        for (int be = 0; be < n1; ++be)
            div[be] += (Tp(d + 1, be) - Tm(d + 1, be)) / (2 * g.spacing(d));
    }
    return div;
}

// ---------------------------------------------------------------------------
// Space-time field view over a sliding window of snapshots: cubic in space,
// Hermite in time.  u_t comes from the stored velocity, u_tt from the
// equation; spatial gradients are interpolated finite-difference fields so
// the pullback's chain rule uses (u, u_t, grad u) only.
// ---------------------------------------------------------------------------

class SpacetimeField {
   public:
    SpacetimeField(const PotentialModel& model, int threads = 0)
        : model_(model), threads_(threads) {}

    void push(const FieldState& s) {
        Entry e;
        e.t = s.time;
        e.state = s;
        const GridSpec& g = s.grid;
        std::size_t n = g.node_count();
        for (int c = 0; c < s.k; ++c) {
            for (int d = 0; d < g.nd; ++d) e.grad[c][d].resize(n);
            e.utt[c].resize(n);
            parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    int id[3];
                    g.unindex(i, id);
                    double gv[3];
                    s.gradient(c, id[0], id[1], id[2], gv);
                    for (int d = 0; d < g.nd; ++d) e.grad[c][d][i] = gv[d];
                    // u_tt = Lap u - f(u)/eps^2
                    double lap = 0;
                    for (int d = 0; d < g.nd; ++d) {
                        int ip[3] = {id[0], id[1], id[2]}, im[3] = {id[0], id[1], id[2]};
                        ip[d] += 1;
                        im[d] -= 1;
                        double h = g.spacing(d);
                        lap += (s.u[c][g.index(ip[0], ip[1], ip[2])] - 2 * s.u[c][i] +
                                s.u[c][g.index(im[0], im[1], im[2])]) /
                               (h * h);
                    }
                    double val[2] = {s.u[0][i], s.k > 1 ? s.u[1][i] : 0.0};
                    double fg[2];
                    model_.grad(val, fg);
                    e.utt[c][i] = lap - fg[c] / (s.eps * s.eps);
                }
            }, threads_);
        }
        window_.push_back(std::move(e));
    }

    void drop_before(double t) {
        while (window_.size() > 2 && window_[1].t <= t) window_.pop_front();
    }

    bool covers(double t_lo, double t_hi) const {
        return !window_.empty() && window_.front().t <= t_lo + 1e-12 &&
               window_.back().t >= t_hi - 1e-12;
    }
    double t_front() const { return window_.empty() ? 0 : window_.front().t; }
    double t_back() const { return window_.empty() ? 0 : window_.back().t; }
    const GridSpec& grid() const { return window_.front().state.grid; }
    int k() const { return window_.front().state.k; }
    double eps() const { return window_.front().state.eps; }

    // u and Du = (u_t, grad u) at a spacetime point, per component
    struct Jet {
        double u[2];
        double Du[2][4];  // alpha = 0..N
    };

    Jet eval(const Vec& tx) const {
        int lo = locate(tx[0]);
        const Entry& e0 = window_[lo];
        const Entry& e1 = window_[lo + 1];
        double x[3] = {0, 0, 0};
        const GridSpec& g = e0.state.grid;
        for (int d = 0; d < g.nd; ++d) x[d] = tx[1 + d];
        Jet out{};
        for (int c = 0; c < k(); ++c) {
            double u0 = interp_cubic(g, e0.state.u[c], x);
            double u1 = interp_cubic(g, e1.state.u[c], x);
            double v0 = interp_cubic(g, e0.state.ut[c], x);
            double v1 = interp_cubic(g, e1.state.ut[c], x);
            out.u[c] = hermite(tx[0], e0.t, e1.t, u0, u1, v0, v1);
            double a0 = interp_cubic(g, e0.utt[c], x);
            double a1 = interp_cubic(g, e1.utt[c], x);
            out.Du[c][0] = hermite(tx[0], e0.t, e1.t, v0, v1, a0, a1);
            for (int d = 0; d < g.nd; ++d) {
                double g0 = interp_cubic(g, e0.grad[c][d], x);
                double g1 = interp_cubic(g, e1.grad[c][d], x);
                // gradient advances with the interpolated velocity gradient:
                // Hermite with FD slope between the two rows is adequate here
                double slope = (g1 - g0) / (e1.t - e0.t);
                out.Du[c][d + 1] = hermite(tx[0], e0.t, e1.t, g0, g1, slope, slope);
            }
        }
        return out;
    }

   private:
    int locate(double t) const {
        require(window_.size() >= 2, "SpacetimeField: need at least two snapshots");
        require(covers(t, t), "SpacetimeField: time " + std::to_string(t) +
                                  " outside the buffered window [" +
                                  std::to_string(t_front()) + ", " + std::to_string(t_back()) +
                                  "]");
        int lo = 0;
        while (lo + 2 < static_cast<int>(window_.size()) && window_[lo + 1].t <= t) ++lo;
        return lo;
    }
    struct Entry {
        double t;
        FieldState state;
        std::array<std::array<std::vector<double>, 3>, 2> grad;
        std::array<std::vector<double>, 2> utt;
    };
    PotentialModel model_;
    int threads_;
    std::deque<Entry> window_;
};

// ---------------------------------------------------------------------------
// Pulled-back field v = u o psi on a slice {y^0 = s}.
// ---------------------------------------------------------------------------

struct PulledBackField {
    double s = 0;          // y^0
    int k = 1;
    int m1 = 0;            // y^1 samples
    int mnu = 0;           // samples per normal axis
    double nu_extent = 0;  // axis range [-w, w]
    double eps = 0;

    // flattened (y1, nu...) row-major; k components
    std::vector<double> v[2];
    std::vector<double> v_y0[2], v_y1[2];
    std::vector<double> v_nu[2][2];  // [comp][nu axis]
    std::vector<double> a00, a01, a11, sqrtg;  // tau-block of a^{alpha beta}
    std::vector<double> anu[2][2];             // normal block of a
    std::vector<double> amix[2][2];            // a^{tau i, nu j} mixed block

    int cols() const { return k == 1 ? mnu : mnu * mnu; }
    std::size_t size() const { return static_cast<std::size_t>(m1) * cols(); }
    double nu_coord(int axis_index) const {
        return -nu_extent + 2 * nu_extent * axis_index / (mnu - 1);
    }
    double dnu() const { return 2 * nu_extent / (mnu - 1); }

    // |y^nu| at a flattened column index
    double nu_radius(int col) const {
        if (k == 1) return std::abs(nu_coord(col));
        double a = nu_coord(col / mnu), b = nu_coord(col % mnu);
        return std::sqrt(a * a + b * b);
    }
};

inline PulledBackField pullback_slice(const SpacetimeField& field, const TubularChart& chart,
                                      double s, double nu_extent, int m1, int mnu) {
    PulledBackField out;
    out.s = s;
    out.k = chart.k;
    out.m1 = m1;
    out.mnu = mnu;
    out.nu_extent = nu_extent;
    out.eps = field.eps();
    int cols = out.cols();
    std::size_t total = out.size();
    for (int c = 0; c < chart.k; ++c) {
        out.v[c].resize(total);
        out.v_y0[c].resize(total);
        out.v_y1[c].resize(total);
        for (int d = 0; d < chart.k; ++d) out.v_nu[c][d].resize(total);
    }
    out.a00.resize(total);
    out.a01.resize(total);
    out.a11.resize(total);
    out.sqrtg.resize(total);
    for (int i = 0; i < chart.k; ++i)
        for (int j = 0; j < chart.k; ++j) out.anu[i][j].resize(total);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < chart.k; ++j) out.amix[i][j].resize(total);

    int n1 = chart.dim();
    parallel_for(m1, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i1 = lo; i1 < hi; ++i1) {
            double y1 = static_cast<double>(i1) / m1;
            ChartJet cj = chart.jet(s, y1);
            for (int c = 0; c < cols; ++c) {
                Vec y(n1);
                y[0] = s;
                y[1] = y1;
                if (chart.k == 1) {
                    y[2] = out.nu_coord(c);
                } else {
                    y[2] = out.nu_coord(c / mnu);
                    y[3] = out.nu_coord(c % mnu);
                    if (out.nu_radius(c) > nu_extent + 1e-12) continue;  // untouched corner
                }
                Vec tx = chart.psi(cj, y);
                Mat D = chart.dpsi(cj, y);
                SpacetimeField::Jet jet = field.eval(tx);
                std::size_t idx = i1 * cols + c;
                // chain rule v_{y^al} = u_{x^be} psi^be_{y^al}
                for (int comp = 0; comp < chart.k; ++comp) {
                    out.v[comp][idx] = jet.u[comp];
                    for (int al = 0; al < n1; ++al) {
                        double acc = 0;
                        for (int be = 0; be < n1; ++be) acc += jet.Du[comp][be] * D(be, al);
                        if (al == 0)
                            out.v_y0[comp][idx] = acc;
                        else if (al == 1)
                            out.v_y1[comp][idx] = acc;
                        else
                            out.v_nu[comp][al - 2][idx] = acc;
                    }
                }
                // metric data (no b needed on slices)
                Mat G(n1, n1);
                for (int a = 0; a < n1; ++a)
                    for (int b2 = a; b2 < n1; ++b2) {
                        double acc = -D(0, a) * D(0, b2);
                        for (int r = 1; r < n1; ++r) acc += D(r, a) * D(r, b2);
                        G(a, b2) = acc;
                        G(b2, a) = acc;
                    }
                double gdet = det(G);
                out.sqrtg[idx] = std::sqrt(std::max(0.0, -gdet));
                Mat Gi = inverse(G);
                out.a00[idx] = -Gi(0, 0);
                out.a01[idx] = 0.0;
                out.a11[idx] = Gi(1, 1);
                for (int i = 0; i < chart.k; ++i)
                    for (int j = 0; j < chart.k; ++j) out.anu[i][j][idx] = Gi(2 + i, 2 + j);
                for (int i = 0; i < chart.k; ++i) out.amix[0][i][idx] = 0.0;  // a^{0,nu} = 0
                for (int i = 0; i < chart.k; ++i) out.amix[1][i][idx] = Gi(1, 2 + i);
            }
        }
    });
    return out;
}

// pointwise transformed energies on a slice
struct SliceEnergies {
    std::vector<double> e_G;    // (1/2) a^{ab} v_a . v_b + F/eps^2
    std::vector<double> e_nu;   // |grad_nu v|^2/2 + F/eps^2
    std::vector<double> dtau2;  // |D_tau v|^2 = |v_y0|^2 + |v_y1|^2
};

inline SliceEnergies transformed_energy(const PulledBackField& f, const PotentialModel& model) {
    SliceEnergies out;
    std::size_t n = f.size();
    out.e_G.assign(n, 0.0);
    out.e_nu.assign(n, 0.0);
    out.dtau2.assign(n, 0.0);
    double ie2 = 1.0 / (f.eps * f.eps);
    for (std::size_t i = 0; i < n; ++i) {
        double val[2] = {f.v[0][i], f.k > 1 ? f.v[1][i] : 0.0};
        double F = model.F(val) * ie2;
        double quad = 0, nu2 = 0, dtau2 = 0;
        for (int c = 0; c < f.k; ++c) {
            double v0 = f.v_y0[c][i], v1 = f.v_y1[c][i];
            quad += f.a00[i] * v0 * v0 + f.a11[i] * v1 * v1 + 2 * f.a01[i] * v0 * v1;
            dtau2 += v0 * v0 + v1 * v1;
            for (int d = 0; d < f.k; ++d) {
                for (int d2 = 0; d2 < f.k; ++d2)
                    quad += f.anu[d][d2][i] * f.v_nu[c][d][i] * f.v_nu[c][d2][i];
                quad += 2 * f.amix[1][d][i] * v1 * f.v_nu[c][d][i];
                nu2 += f.v_nu[c][d][i] * f.v_nu[c][d][i];
            }
        }
        out.e_G[i] = 0.5 * quad + F;
        out.e_nu[i] = 0.5 * nu2 + F;
        out.dtau2[i] = dtau2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Defect confinement, k = 1:  D(v; rho) = int |y^nu| |v - sign(y^nu)|^2 dy'.
// ---------------------------------------------------------------------------

inline double defect_confinement_nu_scalar(const PulledBackField& f, int i1, double rho) {
    require(f.k == 1, "defect_confinement_nu_scalar: k = 1 slices only");
    double dnu = f.dnu();
    double acc = 0;
    for (int c = 0; c < f.mnu; ++c) {
        double ynu = f.nu_coord(c);
        if (std::abs(ynu) > rho + 1e-12) continue;
        double w = (std::abs(std::abs(ynu) - rho) < 1e-12) ? 0.5 : 1.0;
        double sgn = ynu >= 0 ? 1.0 : -1.0;
        double d = f.v[0][static_cast<std::size_t>(i1) * f.mnu + c] - sgn;
        acc += w * std::abs(ynu) * d * d;
    }
    return acc * dnu;
}

inline double defect_confinement_scalar(const PulledBackField& f, double rho) {
    std::vector<double> rows(f.m1);
    for (int i1 = 0; i1 < f.m1; ++i1) rows[i1] = defect_confinement_nu_scalar(f, i1, rho);
    return tree_sum(rows) / f.m1;
}

// ---------------------------------------------------------------------------
// Jacobian of the normal gradient, k = 2, centered differences on the slice.
// ---------------------------------------------------------------------------

struct JacobianField {
    int m1 = 0, mnu = 0;
    double nu_extent = 0;
    std::vector<double> J;  // flattened like the slice
    std::vector<double> per_slice_integral;
};

inline JacobianField jacobian_field(const PulledBackField& f) {
    require(f.k == 2, "jacobian_field: k = 2 slices only");
    JacobianField out;
    out.m1 = f.m1;
    out.mnu = f.mnu;
    out.nu_extent = f.nu_extent;
    out.J.assign(f.size(), 0.0);
    out.per_slice_integral.assign(f.m1, 0.0);
    double dn = f.dnu();
    int cols = f.cols();
    for (int i1 = 0; i1 < f.m1; ++i1) {
        double acc = 0;
        for (int a = 1; a + 1 < f.mnu; ++a)
            for (int b = 1; b + 1 < f.mnu; ++b) {
                std::size_t idx = static_cast<std::size_t>(i1) * cols + a * f.mnu + b;
                auto at = [&](int c, int da, int db) {
                    return f.v[c][static_cast<std::size_t>(i1) * cols + (a + da) * f.mnu +
                                  (b + db)];
                };
                double d1u = (at(0, 1, 0) - at(0, -1, 0)) / (2 * dn);
                double d2u = (at(0, 0, 1) - at(0, 0, -1)) / (2 * dn);
                double d1w = (at(1, 1, 0) - at(1, -1, 0)) / (2 * dn);
                double d2w = (at(1, 0, 1) - at(1, 0, -1)) / (2 * dn);
                double J = d1u * d2w - d2u * d1w;
                out.J[idx] = J;
                acc += J;
            }
        out.per_slice_integral[i1] = acc * dn * dn;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dictionary of admissible test functions omega for the |||.|||_rho norm:
// C^2, compactly supported, |grad omega(y)| <= |y|^2, ||omega||_{W^2,inf} <= 1.
// Versioned: "omega-dict-v1".
// ---------------------------------------------------------------------------

struct OmegaElement {
    std::string name;
    std::function<double(double, double)> value;  // omega(y1, y2)
    double at_origin = 0;
};

struct OmegaDictionary {
    double rho = 0;
    std::vector<OmegaElement> elements;
    std::string version = "omega-dict-v1";
};

namespace detail {
// radial profile with slope s(r) = min(r^2, cap) smoothly tapered to zero
// at rho; returns omega(r) = int_r^rho s, scaled to stay admissible.
struct RadialPeak {
    double rho, cap, taper_start;
    double scale = 1.0;
    double slope(double r) const {
        double s = std::min(r * r, cap);
        if (r > taper_start) {
            double t = (r - taper_start) / (rho - taper_start);
            if (t >= 1) return 0.0;
            double fade = 1 - t * t * (3 - 2 * t);  // C^1 fade to zero
            s *= fade;
        }
        return s;
    }
    double value(double r) const {
        if (r >= rho) return 0.0;
        // fixed-order quadrature of the slope
        int n = 64;
        double acc = 0, dr = (rho - r) / n;
        for (int i = 0; i < n; ++i) {
            double a = r + i * dr, b = a + dr;
            acc += dr / 6 * (slope(a) + 4 * slope(0.5 * (a + b)) + slope(b));
        }
        return scale * acc;
    }
};
}  // namespace detail

inline OmegaDictionary make_omega_dictionary(double rho) {
    OmegaDictionary dict;
    dict.rho = rho;
    // admissibility caps: |omega'| <= min(r^2, 1), |omega''| <= 1 needs the
    // quadratic stretch to stop at r = 0.45 (slope' = 2r <= 0.9)
    double cap = std::min(0.45 * 0.45, 0.25 * rho * rho);
    detail::RadialPeak peak{rho, cap, 0.7 * rho};
    // scale down if the peak value exceeds the W^{2,inf} ball
    double peak0 = peak.value(0.0);
    if (peak0 > 1.0) peak.scale = 1.0 / peak0;
    for (double sign : {1.0, -1.0}) {
        detail::RadialPeak p = peak;
        double s = sign * p.scale;
        dict.elements.push_back(
            {sign > 0 ? "radial-peak+" : "radial-peak-",
             [p, s](double a, double b) {
                 detail::RadialPeak q = p;
                 q.scale = 1.0;
                 return s * q.value(std::sqrt(a * a + b * b));
             },
             s * peak.value(0.0) / peak.scale});
    }
    // translated bumps on two rings; amplitude limited by the gradient
    // constraint relative to the origin
    for (double ring : {0.35 * rho, 0.6 * rho}) {
        int nb = 6;
        double w = 0.45 * ring;
        // bump beta(t) = (1+cos(pi t))/2 on |t|<1; |beta'| <= pi/2
        // |grad omega| = A |beta'|/w <= A pi/(2w); need <= (ring - w)^2
        double A = std::min(1.0, (ring - w) * (ring - w) * 2 * w / PI);
        A = std::min(A, w * w / PI);  // ||D^2||: A pi^2/(2w^2) <= 1 within slack
        if (A < 1e-6) continue;
        for (int b = 0; b < nb; ++b) {
            double th = 2 * PI * b / nb;
            double cx = ring * std::cos(th), cy = ring * std::sin(th);
            for (double sign : {1.0, -1.0}) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "bump-r%.2f-%d%s", ring, b, sign > 0 ? "+" : "-");
                dict.elements.push_back(
                    {buf,
                     [cx, cy, w, A, sign](double a, double bb) {
                         double dx = a - cx, dy = bb - cy;
                         double r = std::sqrt(dx * dx + dy * dy) / w;
                         if (r >= 1) return 0.0;
                         return sign * A * 0.5 * (1 + std::cos(PI * r));
                     },
                     0.0});
            }
        }
    }
    return dict;
}

// verify the sampled admissibility of every element (used by tests)
inline double omega_dictionary_violation(const OmegaDictionary& dict, int samples = 160) {
    double worst = 0;
    double h = 1e-5;
    for (const auto& el : dict.elements) {
        for (int i = 0; i <= samples; ++i)
            for (int j = 0; j <= samples; ++j) {
                double a = -dict.rho + 2 * dict.rho * i / samples;
                double b = -dict.rho + 2 * dict.rho * j / samples;
                double r2 = a * a + b * b;
                if (r2 > dict.rho * dict.rho) continue;
                double v = el.value(a, b);
                worst = std::max(worst, std::abs(v) - 1.0);
                double da = (el.value(a + h, b) - el.value(a - h, b)) / (2 * h);
                double db = (el.value(a, b + h) - el.value(a, b - h)) / (2 * h);
                double gn = std::sqrt(da * da + db * db);
                worst = std::max(worst, gn - r2 - 2e-4);
                worst = std::max(worst, gn - 1.0);
            }
    }
    return worst;
}

// |||J_nu v(y^tau,.) - pi delta_0|||_rho from below over the dictionary, for
// one tangential row; then the averaged functional over the torus.
inline double defect_confinement_nu_vector(const PulledBackField& f, const JacobianField& jf,
                                           int i1, const OmegaDictionary& dict) {
    require(!dict.elements.empty(), "defect_confinement_nu_vector: empty dictionary");
    double dn = f.dnu();
    int cols = f.cols();
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& el : dict.elements) {
        double acc = 0;
        for (int a = 0; a < f.mnu; ++a)
            for (int b = 0; b < f.mnu; ++b) {
                double ya = f.nu_coord(a), yb = f.nu_coord(b);
                if (ya * ya + yb * yb > dict.rho * dict.rho) continue;
                acc += el.value(ya, yb) * jf.J[static_cast<std::size_t>(i1) * cols + a * f.mnu + b];
            }
        acc = acc * dn * dn - PI * el.value(0.0, 0.0);
        best = std::max(best, acc);
    }
    return best;
}

inline double defect_confinement_vector(const PulledBackField& f, const OmegaDictionary& dict) {
    JacobianField jf = jacobian_field(f);
    std::vector<double> rows(f.m1);
    for (int i1 = 0; i1 < f.m1; ++i1)
        rows[i1] = defect_confinement_nu_vector(f, jf, i1, dict);
    return tree_sum(rows) / f.m1;
}

// ---------------------------------------------------------------------------
// Zeta series: the monitored quantities over shrinking windows
// W_nu(s) = B_nu(rho1 - c* s).
// ---------------------------------------------------------------------------

struct ZetaRow {
    double s = 0;
    double window = 0;
    double zeta1 = 0, zeta2 = 0, zeta3 = 0;
    double theta1_abs_integral = 0;
    double theta1_max = 0;
    double bad_measure = 0;        // fraction of tangential points that are bad
    double min_good_energy = 0;    // min over good points of delta int e_nu
    double equip_good = 0;         // (k=1) max over good points of the
                                   // equipartition defect integral
};

struct DiagnosticSeries {
    std::vector<ZetaRow> rows;
    double kappa3 = 0.1, kappa4 = 0.25;
    double delta_eps = 0;
    double rho1 = 0, c_star = 0, kappa2 = 1;
};

inline ZetaRow zeta_row(const PulledBackField& f, const PotentialModel& model, double delta,
                        double rho1, double c_star, double kappa2, const OmegaDictionary* dict,
                        double kappa3, double kappa4) {
    ZetaRow row;
    row.s = f.s;
    double w = rho1 - c_star * std::abs(f.s);
    require(w >= rho1 / 2 - 1e-9, "zeta_row: window underflow at s = " + std::to_string(f.s));
    row.window = w;
    require(f.nu_extent >= w - 1e-12, "zeta_row: slice too narrow for the window");

    SliceEnergies en = transformed_energy(f, model);
    double dn = f.dnu();
    double ie2 = 1.0 / (f.eps * f.eps);

    JacobianField jf;
    if (f.k == 2) jf = jacobian_field(f);

    std::vector<double> z1_rows(f.m1), z3_rows(f.m1), th_abs(f.m1);
    int cols = f.cols();
    int bad = 0;
    double min_good = std::numeric_limits<double>::infinity();
    double equip_worst = 0;
    double z2_acc = 0;
    for (int i1 = 0; i1 < f.m1; ++i1) {
        double z1 = 0, z3 = 0, th = 0, equip = 0;
        for (int c = 0; c < cols; ++c) {
            double r = f.nu_radius(c);
            if (r > w + 1e-12) continue;
            std::size_t idx = static_cast<std::size_t>(i1) * cols + c;
            double wq = 1.0;
            if (f.k == 1 && (std::abs(f.nu_coord(c) - w) < 1e-12 ||
                             std::abs(f.nu_coord(c) + w) < 1e-12))
                wq = 0.5;
            double cell = f.k == 1 ? dn : dn * dn;
            double val[2] = {f.v[0][idx], f.k > 1 ? f.v[1][idx] : 0.0};
            double Fv = model.F(val) * ie2;
            z1 += wq * (1 + kappa2 * r * r) * en.e_G[idx] * cell;
            // |D_tau v|^2 + |y^nu|^2 (|grad_nu v|^2 + F/eps^2)
            z3 += wq * (en.dtau2[idx] + r * r * (2 * en.e_nu[idx] - Fv)) * cell;
            th += wq * en.e_nu[idx] * cell;
            if (f.k == 1) {
                double vn = f.v_nu[0][0][idx];
                equip += wq * std::abs(f.eps / 2 * vn * vn - model.F(val) / f.eps) * cell;
            }
        }
        z1_rows[i1] = delta * z1 - 1.0;
        z3_rows[i1] = delta * z3;
        double theta1 = delta * th - 1.0;
        th_abs[i1] = std::abs(theta1);
        row.theta1_max = std::max(row.theta1_max, theta1);

        double Dnu;
        if (f.k == 1) {
            Dnu = defect_confinement_nu_scalar(f, i1, rho1 / 2);
        } else {
            require(dict != nullptr, "zeta_row: k=2 requires an omega dictionary");
            Dnu = defect_confinement_nu_vector(f, jf, i1, *dict);
        }
        z2_acc += Dnu;
        bool good = Dnu <= kappa3 && theta1 <= kappa4;
        if (!good) {
            ++bad;
        } else {
            min_good = std::min(min_good, delta * th);
            equip_worst = std::max(equip_worst, equip);
        }
    }
    row.zeta1 = tree_sum(z1_rows) / f.m1;
    row.zeta3 = tree_sum(z3_rows) / f.m1;
    row.zeta2 = z2_acc / f.m1;
    row.theta1_abs_integral = tree_sum(th_abs) / f.m1;
    row.bad_measure = static_cast<double>(bad) / f.m1;
    row.min_good_energy = std::isfinite(min_good) ? min_good : 0.0;
    row.equip_good = equip_worst;
    return row;
}

// ---------------------------------------------------------------------------
// Defect tracking.
// ---------------------------------------------------------------------------

// k = 1: zero level set by linear interpolation along grid edges
inline std::vector<std::array<double, 3>> track_defect_scalar(const FieldState& s) {
    require(s.k == 1, "track_defect_scalar: scalar fields only");
    const GridSpec& g = s.grid;
    std::vector<std::array<double, 3>> pts;
    int nz = g.nd == 3 ? g.cells[2] : 1;
    for (int i = 0; i < g.cells[0]; ++i)
        for (int j = 0; j < g.cells[1]; ++j)
            for (int kk = 0; kk < nz; ++kk) {
                double u0 = s.u[0][g.index(i, j, kk)];
                int id[3] = {i, j, kk};
                for (int d = 0; d < g.nd; ++d) {
                    int ip[3] = {i, j, kk};
                    ip[d] += 1;
                    double u1 = s.u[0][g.index(ip[0], ip[1], ip[2])];
                    if ((u0 <= 0 && u1 > 0) || (u0 > 0 && u1 <= 0)) {
                        double t = u0 / (u0 - u1);
                        std::array<double, 3> p{0, 0, 0};
                        for (int dd = 0; dd < g.nd; ++dd) p[dd] = g.coord(id[dd], dd);
                        p[d] += t * g.spacing(d);
                        pts.push_back(p);
                    }
                }
            }
    return pts;
}

// radius statistics of a tracked point cloud around a center
struct RadiusStat {
    double mean = 0, min = 0, max = 0;
    std::size_t count = 0;
};

inline RadiusStat radius_of_locus(const std::vector<std::array<double, 3>>& pts, double cx,
                                  double cy) {
    RadiusStat r;
    if (pts.empty()) return r;
    r.min = std::numeric_limits<double>::infinity();
    for (const auto& p : pts) {
        double d = std::hypot(p[0] - cx, p[1] - cy);
        r.mean += d;
        r.min = std::min(r.min, d);
        r.max = std::max(r.max, d);
    }
    r.mean /= pts.size();
    r.count = pts.size();
    return r;
}

// k = 2: per-x1-slice vortex center as the first moment of the planar
// Jacobian, restricted to a window around a hint (needed when a
// compensating antivortex lives elsewhere on the torus).
struct VortexTrack {
    std::vector<double> x1;
    std::vector<double> cx, cy;  // center per slice
    std::vector<bool> found;
};

inline VortexTrack track_defect_vortex(const FieldState& s,
                                       const std::function<void(double, double&, double&)>& hint,
                                       double window_radius) {
    require(s.k == 2 && s.grid.nd == 3, "track_defect_vortex: k=2, 3-D grids");
    const GridSpec& g = s.grid;
    VortexTrack tr;
    double h1 = g.spacing(1), h2 = g.spacing(2);
    for (int i = 0; i < g.cells[0]; ++i) {
        double x1 = g.coord(i, 0);
        double hx, hy;
        hint(x1, hx, hy);
        double mass = 0, mx = 0, my = 0;
        for (int j = 0; j < g.cells[1]; ++j)
            for (int kk = 0; kk < g.cells[2]; ++kk) {
                double a = g.coord(j, 1), b = g.coord(kk, 2);
                double da = g.axis_dist(a, hx, 1), db = g.axis_dist(b, hy, 2);
                if (da * da + db * db > window_radius * window_radius) continue;
                // planar Jacobian by centered differences
                auto at = [&](int c, int dj, int dk) {
                    return s.u[c][g.index(i, j + dj, kk + dk)];
                };
                double d1u = (at(0, 1, 0) - at(0, -1, 0)) / (2 * h1);
                double d2u = (at(0, 0, 1) - at(0, 0, -1)) / (2 * h2);
                double d1w = (at(1, 1, 0) - at(1, -1, 0)) / (2 * h1);
                double d2w = (at(1, 0, 1) - at(1, 0, -1)) / (2 * h2);
                double J = d1u * d2w - d2u * d1w;
                mass += J;
                mx += J * (hx + da);
                my += J * (hy + db);
            }
        tr.x1.push_back(x1);
        bool ok = std::abs(mass) > 1e-8;
        tr.found.push_back(ok);
        tr.cx.push_back(ok ? mx / mass : hx);
        tr.cy.push_back(ok ? my / mass : hy);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Dual-norm gap between delta_eps T_eps(u) and T(Gamma) over a dictionary of
// W^{1,inf}-normalized test tensors.  Convention: per-component product
// bumps; ||m||_{W^{1,inf}} = max(sup |m|, sup |Dm|) <= 1 per element.
// ---------------------------------------------------------------------------

struct TensorTestGeometry {
    std::string name;
    Vec center;     // (t, x...)
    Vec halfwidth;  // per axis
    double norm = 1;

    double phi(const Vec& x) const {
        double v = 1;
        for (int d = 0; d < x.n; ++d) {
            double t = (x[d] - center[d]) / halfwidth[d];
            if (t <= -1 || t >= 1) return 0.0;
            v *= 0.5 * (1 + std::cos(PI * t));
        }
        return v / norm;
    }
    void normalize(int dim) {
        double dmax = 0;
        for (int d = 0; d < dim; ++d) dmax = std::max(dmax, PI / (2 * halfwidth[d]));
        norm = std::max(1.0, dmax);
    }
};

struct DualNormEstimate {
    double gap = 0;
    std::string argmax;
    int dictionary_size = 0;
    bool lower_bound = true;  // by construction
};

class EmtGapProbe {
   public:
    EmtGapProbe(std::vector<TensorTestGeometry> geoms, const PotentialModel& model, double delta,
                int n1)
        : geoms_(std::move(geoms)), model_(model), delta_(delta), n1_(n1) {
        require(!geoms_.empty() && geoms_.size() <= 16, "EmtGapProbe: 1..16 geometries");
        field_moments_.assign(geoms_.size(), Mat(n1, n1));
        surface_moments_.assign(geoms_.size(), Mat(n1, n1));
    }

    // accumulate the field side with trapezoid weights in t
    void feed(const FieldState& s, double dt_weight) {
        const GridSpec& g = s.grid;
        std::size_t rows = g.cells[0];
        std::size_t rl = g.node_count() / rows;
        double vol = g.cell_volume();
        std::vector<std::vector<Mat>> parts(geoms_.size());
        for (auto& p : parts) p.assign(rows, Mat(n1_, n1_));
        parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
            for (std::size_t r = rlo; r < rhi; ++r) {
                for (std::size_t q = 0; q < rl; ++q) {
                    std::size_t i = r * rl + q;
                    int id[3];
                    g.unindex(i, id);
                    Vec x(n1_);
                    x[0] = s.time;
                    for (int d = 0; d < g.nd; ++d) x[1 + d] = g.coord(id[d], d);
                    double phis[16];
                    bool any = false;
                    for (std::size_t ge = 0; ge < geoms_.size(); ++ge) {
                        phis[ge] = geoms_[ge].phi(x);
                        if (phis[ge] != 0) any = true;
                    }
                    if (!any) continue;
                    Mat T = emt_at(s, id[0], id[1], id[2], model_, true);
                    for (std::size_t ge = 0; ge < geoms_.size(); ++ge) {
                        if (phis[ge] == 0) continue;
                        for (int al = 0; al < n1_; ++al)
                            for (int be = 0; be < n1_; ++be)
                                parts[ge][r](al, be) += phis[ge] * T(al, be) * vol;
                    }
                }
            }
        });
        for (std::size_t ge = 0; ge < geoms_.size(); ++ge) {
            for (int al = 0; al < n1_; ++al)
                for (int be = 0; be < n1_; ++be) {
                    std::vector<double> col(rows);
                    for (std::size_t r = 0; r < rows; ++r) col[r] = parts[ge][r](al, be);
                    field_moments_[ge](al, be) += dt_weight * tree_sum(col);
                }
        }
    }

    // surface side: quadrature of phi P sqrt(-gamma)
    void set_surface(const SurfaceEMT& emt) {
        for (std::size_t ge = 0; ge < geoms_.size(); ++ge) {
            for (int al = 0; al < n1_; ++al)
                for (int be = 0; be < n1_; ++be) {
                    const auto& geom = geoms_[ge];
                    surface_moments_[ge](al, be) = emt.pair([&](const Vec& x) {
                        Mat m(n1_, n1_);
                        m(al, be) = geom.phi(x);
                        return m;
                    });
                }
        }
    }

    DualNormEstimate estimate() const {
        DualNormEstimate est;
        est.dictionary_size = static_cast<int>(geoms_.size()) * n1_ * n1_;
        for (std::size_t ge = 0; ge < geoms_.size(); ++ge)
            for (int al = 0; al < n1_; ++al)
                for (int be = 0; be < n1_; ++be) {
                    double diff = std::abs(delta_ * field_moments_[ge](al, be) -
                                           surface_moments_[ge](al, be));
                    if (diff > est.gap) {
                        est.gap = diff;
                        est.argmax = geoms_[ge].name + "[" + std::to_string(al) + "," +
                                     std::to_string(be) + "]";
                    }
                }
        return est;
    }

    // gap against a second probe's field side (for tensor-to-tensor
    // comparisons without a surface)
    DualNormEstimate estimate_against_field(const EmtGapProbe& other, double other_delta) const {
        DualNormEstimate est;
        est.dictionary_size = static_cast<int>(geoms_.size()) * n1_ * n1_;
        for (std::size_t ge = 0; ge < geoms_.size(); ++ge)
            for (int al = 0; al < n1_; ++al)
                for (int be = 0; be < n1_; ++be) {
                    double diff = std::abs(delta_ * field_moments_[ge](al, be) -
                                           other_delta * other.field_moments_[ge](al, be));
                    if (diff > est.gap) {
                        est.gap = diff;
                        est.argmax = geoms_[ge].name;
                    }
                }
        return est;
    }

    const std::vector<TensorTestGeometry>& geometries() const { return geoms_; }

   private:
    std::vector<TensorTestGeometry> geoms_;
    PotentialModel model_;
    double delta_;
    int n1_;
    std::vector<Mat> field_moments_, surface_moments_;
};

// a small default dictionary of bump geometries covering the box
inline std::vector<TensorTestGeometry> default_tensor_dictionary(double t_lo, double t_hi,
                                                                 const GridSpec& g) {
    std::vector<TensorTestGeometry> out;
    int n1 = g.nd + 1;
    double tc = 0.5 * (t_lo + t_hi), tw = 0.5 * (t_hi - t_lo);
    auto push = [&](const std::string& name, std::initializer_list<double> c,
                    std::initializer_list<double> w) {
        TensorTestGeometry geo;
        geo.name = name;
        geo.center = Vec(n1);
        geo.halfwidth = Vec(n1);
        int i = 0;
        for (double v : c) geo.center[i++] = v;
        i = 0;
        for (double v : w) geo.halfwidth[i++] = v;
        geo.normalize(n1);
        out.push_back(geo);
    };
    double cx0 = 0.5 * (g.lo[0] + g.hi[0]), wx0 = 0.5 * (g.hi[0] - g.lo[0]);
    double cx1 = g.nd > 1 ? 0.5 * (g.lo[1] + g.hi[1]) : 0;
    double wx1 = g.nd > 1 ? 0.5 * (g.hi[1] - g.lo[1]) : 1;
    if (g.nd == 2) {
        push("broad", {tc, cx0, cx1}, {tw, wx0, wx1});
        push("narrow", {tc, cx0, cx1}, {0.6 * tw, 0.5 * wx0, 0.5 * wx1});
        push("offset", {tc, cx0 + 0.25 * wx0, cx1 + 0.2 * wx1}, {0.8 * tw, 0.5 * wx0, 0.6 * wx1});
    } else {
        double cx2 = 0.5 * (g.lo[2] + g.hi[2]), wx2 = 0.5 * (g.hi[2] - g.lo[2]);
        push("broad", {tc, cx0, cx1, cx2}, {tw, wx0, wx1, wx2});
        push("narrow", {tc, cx0, cx1, cx2}, {0.6 * tw, 0.5 * wx0, 0.5 * wx1, 0.5 * wx2});
        push("offset", {tc, cx0, cx1 + 0.2 * wx1, cx2}, {0.8 * tw, 0.5 * wx0, 0.6 * wx1, 0.7 * wx2});
    }
    return out;
}

}  // namespace glwave
