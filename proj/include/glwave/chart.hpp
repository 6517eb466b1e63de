#pragma once

#include <optional>
#include <unordered_map>

#include "glwave/surface.hpp"

namespace glwave {

// ---------------------------------------------------------------------------
// Tubular coordinates around the surface:
//   psi(y) = H(y^tau) + sum_i nu_i(y^tau) y^{n+i},  y = (y0, y1, y^nu).
// The chart caches surface and frame jets on a dense (y0, y1) table so that
// bulk evaluation (field preparation, pullbacks, verification sweeps) does
// not re-run the frame construction per point.
// ---------------------------------------------------------------------------

struct ChartJet {
    Vec H;        // (y0, h)
    Vec H0, H1;   // d H / d y0, d H / d y1
    Vec nu[2];    // normal frame vectors
    Vec dnu0[2];  // d nu_i / d y0
    Vec dnu1[2];  // d nu_i / d y1
};

struct MetricData {
    Mat G;       // pulled-back Minkowski metric
    Mat Ginv;    // g^{alpha beta}
    double g;    // det G (negative)
    double sqrt_minus_g;
    Mat a;       // a^{00} = -g^{00}, a^{ij} = g^{ij}, a^{0i} = 0
    Vec b;       // b^beta = (d_alpha sqrt(-g)/sqrt(-g)) g^{alpha beta}
    double conditioning = 0;
    // chart-level constants cache
    double kappa2 = 1, c_star = 0, lambda = 0, Lambda = 0;
};

struct ChartConstants {
    double c_star = 0;
    double kappa2 = 1;
    double lambda = 0;   // pos1/pos1a lower constant
    double Lambda = 0;   // upper constant
};

class TubularChart {
   public:
    int k = 1, N = 2;
    double rho0 = 0, rho1 = 0, T1 = 0;
    SurfaceParametrization param;
    std::shared_ptr<FrameField> frame;
    double max_nu_time = 0;  // sup |nu^0|, bounds |psi^0 - y0|

    int dim() const { return N + 1; }

    ChartJet jet(double y0, double y1) const {
        ChartJet out;
        double span = table_t_hi_ - table_t_lo_;
        double tt = std::clamp((y0 - table_t_lo_) / span * (nt_ - 1), 0.0, double(nt_ - 1));
        // keep a full interior stencil; the local coordinate may leave [0,1)
        int it = std::clamp(static_cast<int>(tt), 1, nt_ - 3);
        double wt[4], ws[4];
        detail::cubic_weights(tt - it, wt);
        double frac = y1 - std::floor(y1);
        double s = frac * my_;
        int is = std::min(static_cast<int>(s), my_ - 1);
        detail::cubic_weights(s - is, ws);

        int n1 = dim();
        auto gather = [&](const std::vector<Vec>& tab) {
            Vec acc(n1);
            for (int ot = 0; ot < 4; ++ot) {
                int row = it - 1 + ot;
                for (int os = 0; os < 4; ++os) {
                    int col = ((is - 1 + os) % my_ + my_) % my_;
                    acc += (wt[ot] * ws[os]) * tab[static_cast<std::size_t>(row) * my_ + col];
                }
            }
            return acc;
        };
        out.H = gather(tab_H_);
        out.H[0] = y0;  // exact
        out.H0 = gather(tab_H0_);
        out.H1 = gather(tab_H1_);
        for (int i = 0; i < k; ++i) {
            out.nu[i] = gather(tab_nu_[i]);
            out.dnu0[i] = gather(tab_dnu0_[i]);
            out.dnu1[i] = gather(tab_dnu1_[i]);
        }
        return out;
    }

    Vec psi(const Vec& y) const {
        ChartJet cj = jet(y[0], y[1]);
        return psi(cj, y);
    }
    Vec psi(const ChartJet& cj, const Vec& y) const {
        Vec out = cj.H;
        for (int i = 0; i < k; ++i) out += y[2 + i] * cj.nu[i];
        return out;
    }

    Mat dpsi(const Vec& y) const {
        ChartJet cj = jet(y[0], y[1]);
        return dpsi(cj, y);
    }
    Mat dpsi(const ChartJet& cj, const Vec& y) const {
        int n1 = dim();
        Mat D(n1, n1);
        Vec c0 = cj.H0, c1 = cj.H1;
        for (int i = 0; i < k; ++i) {
            c0 += y[2 + i] * cj.dnu0[i];
            c1 += y[2 + i] * cj.dnu1[i];
        }
        D.set_col(0, c0);
        D.set_col(1, c1);
        for (int i = 0; i < k; ++i) D.set_col(2 + i, cj.nu[i]);
        return D;
    }

    double sqrt_minus_g_at(const ChartJet& cj, const Vec& y) const {
        Mat D = dpsi(cj, y);
        Mat G = mul_eta(D);
        double g = det(G);
        require(g < 0, "chart: Lorentzian signature lost");
        return std::sqrt(-g);
    }

    MetricData metric_at(const Vec& y) const {
        ChartJet cj = jet(y[0], y[1]);
        MetricData md;
        Mat D = dpsi(cj, y);
        md.G = mul_eta(D);
        md.g = det(md.G);
        require(md.g < 0, "metric_at: det G must be negative");
        md.sqrt_minus_g = std::sqrt(-md.g);
        md.Ginv = inverse(md.G);
        {
            EigenSym e = eigen_sym(md.G);
            double lo = std::numeric_limits<double>::infinity(), hi = 0;
            for (int i = 0; i < dim(); ++i) {
                lo = std::min(lo, std::abs(e.values[i]));
                hi = std::max(hi, std::abs(e.values[i]));
            }
            md.conditioning = hi / std::max(lo, 1e-300);
        }
        int n1 = dim();
        md.a = Mat(n1, n1);
        md.a(0, 0) = -md.Ginv(0, 0);
        for (int i = 1; i < n1; ++i)
            for (int j = 1; j < n1; ++j) md.a(i, j) = md.Ginv(i, j);

        // b^beta: 4th-order centered differences of sqrt(-g).  The normal
        // directions reuse the cached (y0, y1) jet, so interpolation error is
        // constant across the stencil and drops out of the difference.
        Vec grad(n1);
        for (int d = 0; d < n1; ++d) {
            double h = fd_step_;
            auto at = [&](double off) {
                Vec yy = y;
                yy[d] += off;
                if (d <= 1) return sqrt_minus_g_at(jet(yy[0], yy[1]), yy);
                return sqrt_minus_g_at(cj, yy);
            };
            grad[d] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        }
        md.b = Vec(n1);
        for (int be = 0; be < n1; ++be) {
            double acc = 0;
            for (int al = 0; al < n1; ++al) acc += grad[al] / md.sqrt_minus_g * md.Ginv(al, be);
            md.b[be] = acc;
        }
        if (constants_) {
            md.kappa2 = constants_->kappa2;
            md.c_star = constants_->c_star;
            md.lambda = constants_->lambda;
            md.Lambda = constants_->Lambda;
        }
        return md;
    }

    // |grad_nu sqrt(-g)| at y^nu = 0 (the minimality identity)
    double minimality_residual(double y0, double y1) const {
        ChartJet cj = jet(y0, y1);
        double worst = 0;
        for (int i = 0; i < k; ++i) {
            double h = fd_step_;
            auto at = [&](double off) {
                Vec yy(dim());
                yy[0] = y0;
                yy[1] = y1;
                yy[2 + i] = off;
                return sqrt_minus_g_at(cj, yy);
            };
            double d = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
            worst = std::max(worst, std::abs(d));
        }
        return worst;
    }

    double psi0_dy0(const Vec& y) const {
        ChartJet cj = jet(y[0], y[1]);
        double v = 1.0;  // d/dy0 of the exact time coordinate of H
        for (int i = 0; i < k; ++i) v += y[2 + i] * cj.dnu0[i][0];
        return v;
    }

    // --- inversion -------------------------------------------------------

    struct InvertResult {
        bool inside = false;
        Vec y;
        int iters = 0;
        double residual = 0;
    };

    InvertResult invert(const Vec& tx, const Vec* hint = nullptr, double tol = 1e-11) const {
        InvertResult r;
        if (!hint) {
            // certainly-outside short circuit: beyond the reach of the tube
            double reach = rho0 * (std::sqrt(1 + max_nu_time * max_nu_time) + max_nu_time);
            double slack = 4.0 / param.m + 0.1 * rho0;
            if (distance_to_surface_estimate(tx) > reach + slack) return r;
        }
        Vec start = hint ? *hint : seed(tx);
        for (int attempt = 0; attempt < 3; ++attempt) {
            Vec y = start;
            if (attempt == 1)
                for (int i = 0; i < k; ++i) y[2 + i] *= 0.5;
            if (attempt == 2) {
                y = seed(tx);
                for (int i = 0; i < k; ++i) y[2 + i] *= 0.25;
            }
            if (newton(tx, y, tol, r)) return r;
        }
        // divergence: legitimate only outside the tube proper
        double d0 = distance_to_surface_estimate(tx);
        if (d0 > rho0) {
            r.inside = false;
            return r;
        }
        throw GlwError("invert_chart: Newton failed to converge near the tube (seed distance " +
                       std::to_string(d0) + ", residual " + std::to_string(r.residual) + ")");
    }

    bool newton(const Vec& tx, Vec y, double tol, InvertResult& r) const {
        ChartJet cj = jet(y[0], y[1]);
        Vec res = psi(cj, y) - tx;
        double rn = norm(res);
        for (int it = 0; it < 50; ++it) {
            r.iters = it;
            r.residual = rn;
            if (rn < tol) {
                bool in_time = y[0] > -T1 - 1e-12 && y[0] < T1 + 1e-12;
                double rnu = 0;
                for (int i = 0; i < k; ++i) rnu += y[2 + i] * y[2 + i];
                r.inside = in_time && std::sqrt(rnu) <= rho0 * (1 + 1e-9);
                r.y = y;
                r.y[1] = y[1] - std::floor(y[1]);
                return true;
            }
            Mat D = dpsi(cj, y);
            Vec step;
            try {
                step = solve(D, res);
            } catch (const GlwError&) {
                return false;  // singular jacobian (focal set)
            }
            // backtracking line search on the residual norm
            double damp = 1.0;
            bool improved = false;
            for (int ls = 0; ls < 6; ++ls) {
                Vec ynew = y - damp * step;
                ChartJet cjn = jet(ynew[0], ynew[1]);
                Vec resn = psi(cjn, ynew) - tx;
                double rnn = norm(resn);
                if (rnn < rn) {
                    y = ynew;
                    cj = cjn;
                    res = resn;
                    rn = rnn;
                    improved = true;
                    break;
                }
                damp *= 0.5;
            }
            if (!improved) return false;
        }
        return false;
    }

    // crude distance from (t,x) to the sampled surface ring near time t
    double distance_to_surface_estimate(const Vec& tx) const {
        double best = std::numeric_limits<double>::infinity();
        double t = std::clamp(tx[0], -T1, T1);
        for (int i = 0; i < param.m; ++i) {
            ChartJet cj = jet(t, static_cast<double>(i) / param.m);
            double d2 = 0;
            for (int c = 1; c < dim(); ++c) d2 += (tx[c] - cj.H[c]) * (tx[c] - cj.H[c]);
            best = std::min(best, d2);
        }
        return std::sqrt(best);
    }

    Vec seed(const Vec& tx) const {
        double t = std::clamp(tx[0], -T1, T1);
        double best = std::numeric_limits<double>::infinity();
        int besti = 0;
        for (int i = 0; i < param.m; ++i) {
            ChartJet cj = jet(t, static_cast<double>(i) / param.m);
            double d2 = 0;
            for (int c = 1; c < dim(); ++c) d2 += (tx[c] - cj.H[c]) * (tx[c] - cj.H[c]);
            if (d2 < best) {
                best = d2;
                besti = i;
            }
        }
        double y1 = static_cast<double>(besti) / param.m;
        ChartJet cj = jet(t, y1);
        Vec y(dim());
        y[0] = t;
        y[1] = y1;
        Vec diff = tx - cj.H;
        for (int i = 0; i < k; ++i) y[2 + i] = mdot(cj.nu[i], diff);
        return y;
    }

    // --- signed distance (k = 1) ------------------------------------------

    struct DistanceResult {
        double d;
        double d_t;  // time derivative at fixed x
        Vec y;
    };

    DistanceResult signed_distance(const Vec& tx, const Vec* hint = nullptr) const {
        require(k == 1, "signed_distance: k = 1 only");
        InvertResult r = invert(tx, hint);
        require(r.inside, "signed_distance: point outside the chart");
        DistanceResult out;
        out.y = r.y;
        out.d = r.y[2];
        Mat D = dpsi(r.y);
        Mat Dinv = inverse(D);  // rows: d y / d (t,x)
        out.d_t = Dinv(2, 0);
        return out;
    }

    // --- initial hypersurface graph ---------------------------------------

    struct InitialGraph {
        int m1 = 0;                  // y1 samples
        std::vector<double> nu_axis; // y^nu axis samples (k=1) or flattened grid
        std::vector<double> b;       // row-major (y1, nu indices)
        double max_grad = 0;
        double max_b = 0;
    };

    // solve psi^0(b, y') = 0 along y0 for each y' sample
    InitialGraph initial_graph(int m1 = 64, int mnu = 17) const {
        InitialGraph gr;
        gr.m1 = m1;
        int cols = k == 1 ? mnu : mnu * mnu;
        gr.b.assign(static_cast<std::size_t>(m1) * cols, 0.0);
        gr.nu_axis.resize(mnu);
        for (int j = 0; j < mnu; ++j)
            gr.nu_axis[j] = -rho0 + 2.0 * rho0 * j / (mnu - 1);
        for (int i = 0; i < m1; ++i) {
            double y1 = static_cast<double>(i) / m1;
            for (int c = 0; c < cols; ++c) {
                Vec y(dim());
                y[0] = 0;
                y[1] = y1;
                if (k == 1) {
                    y[2] = gr.nu_axis[c];
                } else {
                    y[2] = gr.nu_axis[c / mnu];
                    y[3] = gr.nu_axis[c % mnu];
                }
                double b = 0;
                bool ok = false;
                for (int it = 0; it < 50; ++it) {
                    y[0] = b;
                    ChartJet cj = jet(b, y1);
                    double val = psi(cj, y)[0];
                    double slope = psi0_dy0(y);
                    double step = val / slope;
                    b -= step;
                    if (std::abs(step) < 1e-12) {
                        ok = true;
                        break;
                    }
                }
                require(ok && b > -T1 && b < T1,
                        "initial_graph: no root for psi^0 = 0 inside (-T1, T1)");
                // residual check
                y[0] = b;
                require(std::abs(psi(y)[0]) <= 1e-9, "initial_graph: root residual too large");
                gr.b[static_cast<std::size_t>(i) * cols + c] = b;
                gr.max_b = std::max(gr.max_b, std::abs(b));
            }
        }
        // Lipschitz bound by finite differences on the sample grid
        double dy1 = 1.0 / m1;
        double dnu = 2 * rho0 / (mnu - 1);
        for (int i = 0; i < m1; ++i)
            for (int c = 0; c < cols; ++c) {
                double here = gr.b[static_cast<std::size_t>(i) * cols + c];
                double right = gr.b[static_cast<std::size_t>((i + 1) % m1) * cols + c];
                gr.max_grad = std::max(gr.max_grad, std::abs(right - here) / dy1);
                if (k == 1) {
                    if (c + 1 < cols) {
                        double up = gr.b[static_cast<std::size_t>(i) * cols + c + 1];
                        gr.max_grad = std::max(gr.max_grad, std::abs(up - here) / dnu);
                    }
                } else {
                    int r = c / mnu, s = c % mnu;
                    if (r + 1 < mnu) {
                        double up = gr.b[static_cast<std::size_t>(i) * cols + (r + 1) * mnu + s];
                        gr.max_grad = std::max(gr.max_grad, std::abs(up - here) / dnu);
                    }
                    if (s + 1 < mnu) {
                        double up = gr.b[static_cast<std::size_t>(i) * cols + r * mnu + s + 1];
                        gr.max_grad = std::max(gr.max_grad, std::abs(up - here) / dnu);
                    }
                }
            }
        return gr;
    }

    const ChartConstants& constants() const {
        require(constants_.has_value(), "chart constants not computed; call cone_slope()");
        return *constants_;
    }
    void set_constants(const ChartConstants& c) const { constants_ = c; }
    bool has_constants() const { return constants_.has_value(); }

    // internal: build the jet table
    void build_table(int my, int nt) {
        my_ = my;
        nt_ = nt;
        table_t_lo_ = param.t_lo;
        table_t_hi_ = param.t_hi;
        int n1 = dim();
        std::size_t total = static_cast<std::size_t>(nt_) * my_;
        tab_H_.assign(total, Vec(n1));
        tab_H0_.assign(total, Vec(n1));
        tab_H1_.assign(total, Vec(n1));
        for (int i = 0; i < k; ++i) {
            tab_nu_[i].assign(total, Vec(n1));
            tab_dnu0_[i].assign(total, Vec(n1));
            tab_dnu1_[i].assign(total, Vec(n1));
        }
        double span = table_t_hi_ - table_t_lo_;
        for (int it = 0; it < nt_; ++it) {
            double t = table_t_lo_ + span * it / (nt_ - 1);
            for (int is = 0; is < my_; ++is) {
                double y1 = static_cast<double>(is) / my_;
                std::size_t idx = static_cast<std::size_t>(it) * my_ + is;
                SurfaceJet j = param.jet(t, y1);
                Vec H(n1), H0(n1), H1(n1);
                H[0] = t;
                H0[0] = 1;
                for (int c = 0; c < N; ++c) {
                    H[c + 1] = j.h[c];
                    H0[c + 1] = j.ht[c];
                    H1[c + 1] = j.hs[c];
                }
                tab_H_[idx] = H;
                tab_H0_[idx] = H0;
                tab_H1_[idx] = H1;
                for (int i = 0; i < k; ++i) {
                    tab_nu_[i][idx] = frame->normal(i, t, y1);
                    tab_dnu0_[i][idx] = frame->d_normal(i, 0, t, y1, frame_fd_step_);
                    tab_dnu1_[i][idx] = frame->d_normal(i, 1, t, y1, frame_fd_step_);
                    max_nu_time = std::max(max_nu_time, std::abs(tab_nu_[i][idx][0]));
                }
            }
        }
    }

    double fd_step_ = 5e-3;
    double frame_fd_step_ = 4e-3;

   private:
    Mat mul_eta(const Mat& D) const {
        // D^T eta D
        int n1 = dim();
        Mat G(n1, n1);
        for (int i = 0; i < n1; ++i)
            for (int j = i; j < n1; ++j) {
                double acc = -D(0, i) * D(0, j);
                for (int r = 1; r < n1; ++r) acc += D(r, i) * D(r, j);
                G(i, j) = acc;
                G(j, i) = acc;
            }
        return G;
    }

    int my_ = 0, nt_ = 0;
    double table_t_lo_ = 0, table_t_hi_ = 0;
    std::vector<Vec> tab_H_, tab_H0_, tab_H1_;
    std::array<std::vector<Vec>, 2> tab_nu_, tab_dnu0_, tab_dnu1_;
    mutable std::optional<ChartConstants> constants_;
};

// Bulk inversion helper for one time slice: buckets the surface ring so
// that outside points are rejected in O(1) and inside points get a good
// Newton seed without scanning the ring.
class ChartSliceClassifier {
   public:
    ChartSliceClassifier(const TubularChart& chart, double t, int oversample = 2)
        : chart_(chart), t_(t) {
        mr_ = oversample * chart.param.m;
        pts_.resize(mr_);
        double max_step = 0;
        Vec prev;
        for (int j = 0; j < mr_; ++j) {
            ChartJet cj = chart.jet(t, static_cast<double>(j) / mr_);
            Vec p(chart.dim() - 1);
            for (int c = 1; c < chart.dim(); ++c) p[c - 1] = cj.H[c];
            pts_[j] = p;
            if (j > 0) max_step = std::max(max_step, norm(p - prev));
            prev = p;
        }
        double reach =
            chart.rho0 * (std::sqrt(1 + chart.max_nu_time * chart.max_nu_time) + chart.max_nu_time);
        cutoff_ = reach + 0.5 * max_step + 0.1 * chart.rho0;
        cell_ = std::max(chart.rho0 / 2, max_step);
        for (int j = 0; j < mr_; ++j) buckets_[key(pts_[j])].push_back(j);
        range_ = static_cast<int>(std::ceil(cutoff_ / cell_)) + 1;
    }

    // nearest ring sample within the cutoff; -1 if certainly outside
    int nearest(const Vec& x, double* dist = nullptr) const {
        int dimn = chart_.dim() - 1;
        long q[3] = {0, 0, 0};
        for (int c = 0; c < dimn; ++c) q[c] = static_cast<long>(std::floor(x[c] / cell_));
        double best = cutoff_ * cutoff_;
        int besti = -1;
        int zr = dimn > 2 ? range_ : 0;
        for (long dx = -range_; dx <= range_; ++dx)
            for (long dy = -range_; dy <= range_; ++dy)
                for (long dz = -zr; dz <= zr; ++dz) {
                    auto it = buckets_.find(key3(q[0] + dx, q[1] + dy, q[2] + dz));
                    if (it == buckets_.end()) continue;
                    for (int j : it->second) {
                        double d2 = 0;
                        for (int c = 0; c < dimn; ++c)
                            d2 += (x[c] - pts_[j][c]) * (x[c] - pts_[j][c]);
                        if (d2 < best) {
                            best = d2;
                            besti = j;
                        }
                    }
                }
        if (dist) *dist = std::sqrt(best);
        return besti;
    }

    TubularChart::InvertResult invert(const Vec& tx, const Vec* hint = nullptr) const {
        Vec x(chart_.dim() - 1);
        for (int c = 1; c < chart_.dim(); ++c) x[c - 1] = tx[c];
        int j = nearest(x);
        if (j < 0) return {};  // certainly outside the tube
        if (hint) {
            try {
                auto r = chart_.invert(tx, hint);
                if (r.inside) return r;
            } catch (const GlwError&) {
                // stale hint; fall through to the fresh seed
            }
        }
        Vec seed(chart_.dim());
        seed[0] = t_;
        seed[1] = static_cast<double>(j) / mr_;
        ChartJet cj = chart_.jet(t_, seed[1]);
        Vec diff = tx - cj.H;
        for (int i = 0; i < chart_.k; ++i) seed[2 + i] = mdot(cj.nu[i], diff);
        return chart_.invert(tx, &seed);
    }

   private:
    std::uint64_t key(const Vec& p) const {
        long q[3] = {0, 0, 0};
        for (int c = 0; c < chart_.dim() - 1; ++c)
            q[c] = static_cast<long>(std::floor(p[c] / cell_));
        return key3(q[0], q[1], q[2]);
    }
    static std::uint64_t key3(long a, long b, long c) {
        std::uint64_t h = 1469598103934665603ull;
        for (long v : {a, b, c}) {
            h ^= static_cast<std::uint64_t>(v);
            h *= 0x100000001b3ull;
        }
        return h;
    }
    const TubularChart& chart_;
    double t_, cutoff_, cell_;
    int mr_, range_;
    std::vector<Vec> pts_;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets_;
};

// ---------------------------------------------------------------------------
// Chart construction with automatic shrinking of rho0.
// ---------------------------------------------------------------------------

struct ChartBuildOptions {
    double min_rho = 1e-3;      // fail if rho0 halves below this (e.g. 4 grid cells)
    int table_oversample = 2;   // y1 table density relative to param.m
    int injectivity_t_samples = 9;
    int injectivity_nu_samples = 7;
    std::uint64_t seed = 12345;
};

inline TubularChart build_chart(const SurfaceParametrization& param,
                                std::shared_ptr<FrameField> frame, double rho0, double T1,
                                ChartBuildOptions opts = {}) {
    require(frame != nullptr, "build_chart: frame required");
    require(param.gauge_residual <= 1e-6, "build_chart: gauge-orthogonalized input required");
    TubularChart chart;
    chart.k = frame->codim();
    chart.N = param.N;
    require(chart.N == 1 + chart.k, "build_chart: need N = n + k with n = 1");
    chart.param = param;
    chart.frame = std::move(frame);
    chart.T1 = T1;
    require(param.t_lo <= -T1 && param.t_hi >= T1,
            "build_chart: surface range does not cover (-T1, T1)");

    int my = std::max(64, opts.table_oversample * param.m);
    int nt = std::max<int>(33, static_cast<int>(std::ceil((param.t_hi - param.t_lo) * my / 4)) + 1);
    nt = std::min(nt, 2049);
    chart.build_table(my, nt);

    SplitMix64 rng(opts.seed);
    double rho = rho0;
    while (true) {
        bool ok = true;
        std::string why;
        // signature, psi^0 slope, and timelike-margin sampling
        for (int trial = 0; trial < 400 && ok; ++trial) {
            Vec y(chart.dim());
            y[0] = rng.uniform(-T1, T1);
            y[1] = rng.uniform(0, 1);
            if (chart.k == 1) {
                y[2] = rng.uniform(-rho, rho);
            } else {
                double r = rho * std::sqrt(rng.uniform());
                double th = rng.uniform(0, 2 * PI);
                y[2] = r * std::cos(th);
                y[3] = r * std::sin(th);
            }
            Mat D = chart.dpsi(y);
            Mat G(chart.dim(), chart.dim());
            {
                // G = D^T eta D
                for (int i = 0; i < chart.dim(); ++i)
                    for (int j = 0; j < chart.dim(); ++j) {
                        double acc = -D(0, i) * D(0, j);
                        for (int r2 = 1; r2 < chart.dim(); ++r2) acc += D(r2, i) * D(r2, j);
                        G(i, j) = acc;
                    }
            }
            if (!(det(G) < 0)) {
                ok = false;
                why = "signature";
            }
            if (chart.psi0_dy0(y) < 0.2) {
                ok = false;
                why = "psi0 slope";
            }
        }
        // injectivity sampling: distinct parameter cells must not collide
        if (ok) {
            struct Entry {
                Vec x;
                Vec y;
            };
            std::vector<Entry> pts;
            int ts = opts.injectivity_t_samples, ss = param.m / 2, ns = opts.injectivity_nu_samples;
            for (int it = 0; it < ts; ++it) {
                double t = -T1 + 2.0 * T1 * it / (ts - 1);
                for (int is = 0; is < ss; ++is) {
                    double y1 = static_cast<double>(is) / ss;
                    for (int in = 0; in < ns && ok; ++in) {
                        Vec y(chart.dim());
                        y[0] = t;
                        y[1] = y1;
                        if (chart.k == 1) {
                            y[2] = -rho + 2.0 * rho * in / (ns - 1);
                        } else {
                            double r = rho * std::sqrt((in + 0.5) / ns);
                            double th = 2 * PI * ((is * 7 + in * 3) % 16) / 16.0;
                            y[2] = r * std::cos(th);
                            y[3] = r * std::sin(th);
                        }
                        pts.push_back({chart.psi(y), y});
                    }
                }
            }
            double cell = rho / 4;
            double min_sep = rho / 8;
            // hash by quantized position
            std::vector<std::pair<std::uint64_t, int>> buckets;
            buckets.reserve(pts.size());
            for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
                std::uint64_t h = 1469598103934665603ull;
                for (int c = 0; c < chart.dim(); ++c) {
                    auto q = static_cast<std::int64_t>(std::floor(pts[i].x[c] / cell));
                    h ^= static_cast<std::uint64_t>(q) + 0x9e3779b9ull + (h << 6) + (h >> 2);
                }
                buckets.emplace_back(h, i);
            }
            std::sort(buckets.begin(), buckets.end());
            for (std::size_t bi = 0; bi + 1 < buckets.size() && ok; ++bi) {
                for (std::size_t bj = bi + 1;
                     bj < buckets.size() && buckets[bj].first == buckets[bi].first; ++bj) {
                    const Entry& A = pts[buckets[bi].second];
                    const Entry& B = pts[buckets[bj].second];
                    double dx = norm(A.x - B.x);
                    if (dx > min_sep) continue;
                    double dy1 = std::abs(A.y[1] - B.y[1]);
                    dy1 = std::min(dy1, 1 - dy1);
                    double dyn = std::abs(A.y[0] - B.y[0]) + dy1;
                    for (int c = 2; c < chart.dim(); ++c) dyn += std::abs(A.y[c] - B.y[c]);
                    if (dyn > 4.0 * (2 * T1 / ts + 1.0 / ss + rho / ns)) {
                        ok = false;
                        why = "injectivity";
                    }
                }
            }
        }
        if (ok) {
            chart.rho0 = rho;
            chart.rho1 = std::min(rho / 2, rho - 0.05 * rho);
            break;
        }
        rho *= 0.5;
        require(rho >= opts.min_rho, "build_chart: rho0 shrank below the minimum (" + why +
                                         " check failed at rho0 = " + std::to_string(2 * rho) +
                                         ")");
    }
    return chart;
}

// ---------------------------------------------------------------------------
// Metric-bound verification.
// ---------------------------------------------------------------------------

struct BoundRecord {
    std::string name;
    double constant = 0;
    Vec worst_point;
    bool pass = true;
};

struct VerificationReport {
    std::vector<BoundRecord> records;
    double minimality_residual = 0;
    Vec minimality_worst;
    ChartConstants constants;

    const BoundRecord& operator[](const std::string& name) const {
        for (const auto& r : records)
            if (r.name == name) return r;
        throw GlwError("VerificationReport: no record " + name);
    }
    nlohmann::json to_json() const {
        nlohmann::json out;
        out["records"] = nlohmann::json::array();
        for (const auto& r : records) {
            nlohmann::json rec;
            rec["name"] = r.name;
            rec["constant"] = r.constant;
            rec["worst_point"] =
                std::vector<double>(r.worst_point.a.begin(), r.worst_point.a.begin() + r.worst_point.n);
            rec["pass"] = r.pass;
            out["records"].push_back(rec);
        }
        out["minimality_residual"] = minimality_residual;
        out["c_star"] = constants.c_star;
        out["kappa2"] = constants.kappa2;
        out["lambda"] = constants.lambda;
        out["Lambda"] = constants.Lambda;
        return out;
    }
};

// Cone slope c*: smallest constant with |a^{r alpha} xi_alpha xi_0| <=
// (c*/2) a^{alpha beta} xi_alpha xi_beta for all xi, over samples and all
// normal rows r.  Per sample this is an eigenvalue computation.  kappa2 and
// the pos1/pos1a constants ride along.
inline ChartConstants cone_slope(const TubularChart& chart, int samples = 300,
                                 std::uint64_t seed = 999) {
    SplitMix64 rng(seed);
    ChartConstants cc;
    cc.lambda = std::numeric_limits<double>::infinity();
    double worst_ratio = 0;
    int n1 = chart.dim();
    std::vector<Mat> a_samples;
    std::vector<double> r2_samples;
    for (int trial = 0; trial < samples; ++trial) {
        Vec y(n1);
        y[0] = rng.uniform(-chart.T1, chart.T1);
        y[1] = rng.uniform(0, 1);
        double r2 = 0;
        if (chart.k == 1) {
            y[2] = rng.uniform(-chart.rho0, chart.rho0);
            r2 = y[2] * y[2];
        } else {
            double r = chart.rho0 * std::sqrt(rng.uniform());
            double th = rng.uniform(0, 2 * PI);
            y[2] = r * std::cos(th);
            y[3] = r * std::sin(th);
            r2 = r * r;
        }
        MetricData md = chart.metric_at(y);
        a_samples.push_back(md.a);
        r2_samples.push_back(r2);

        Mat asqrt_inv = inverse(sqrt_spd(md.a));
        for (int row = 2; row < n1; ++row) {
            // sym(a_row tensor e_0)
            Mat Mrow(n1, n1);
            for (int al = 0; al < n1; ++al) {
                Mrow(al, 0) += 0.5 * md.a(row, al);
                Mrow(0, al) += 0.5 * md.a(row, al);
            }
            Mat S = asqrt_inv * Mrow * asqrt_inv;
            EigenSym e = eigen_sym(S);
            for (int i = 0; i < n1; ++i) worst_ratio = std::max(worst_ratio, std::abs(e.values[i]));
        }

        // pos1a-style constants: eigenvalues of the tau block relative to
        // |xi_tau|^2, with the normal block pinned near identity
        Mat tau_block(2, 2);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) tau_block(i, j) = md.a(i, j);
        EigenSym e = eigen_sym(tau_block);
        for (int i = 0; i < 2; ++i) {
            cc.lambda = std::min(cc.lambda, e.values[i]);
            cc.Lambda = std::max(cc.Lambda, e.values[i]);
        }
    }
    cc.c_star = 2 * worst_ratio;

    if (chart.k == 1) {
        cc.kappa2 = 1.0;  // pos1a justifies kappa2 = 1 in the scalar case
    } else {
        // smallest kappa2 >= 1 with
        // (1 + kappa2 r^2) a - lambda/2 diag(tau) - (1 + r^2) diag(nu) >= 0
        double lam = cc.lambda;
        auto feasible = [&](double kap) {
            for (std::size_t i = 0; i < a_samples.size(); ++i) {
                Mat M = (1 + kap * r2_samples[i]) * a_samples[i];
                M(0, 0) -= 0.5 * lam;
                M(1, 1) -= 0.5 * lam;
                for (int d = 2; d < n1; ++d) M(d, d) -= 1 + r2_samples[i];
                EigenSym e2 = eigen_sym(M);
                for (int d = 0; d < n1; ++d)
                    if (e2.values[d] < -1e-12) return false;
            }
            return true;
        };
        double lo = 1.0, hi = 1.0;
        while (!feasible(hi) && hi < 1e4) hi *= 2;
        require(hi < 1e4, "cone_slope: kappa2 grew unbounded");
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (lo + hi);
            (feasible(mid) ? hi : lo) = mid;
        }
        cc.kappa2 = std::max(1.0, hi);
    }
    chart.set_constants(cc);
    return cc;
}

inline VerificationReport verify_metric_bounds(const TubularChart& chart, int point_samples = 250,
                                               int xi_samples = 24, std::uint64_t seed = 4242) {
    SplitMix64 rng(seed);
    VerificationReport rep;
    int n1 = chart.dim();

    BoundRecord w1inf{"coeffs1_w1inf", 0, Vec(n1), true};
    BoundRecord c1y0{"coeffs1_y0", 0, Vec(n1), true};
    BoundRecord c2{"coeffs2", 0, Vec(n1), true};
    BoundRecord c3{"coeffs3", 0, Vec(n1), true};
    BoundRecord p1c{"pos1_lower", std::numeric_limits<double>::infinity(), Vec(n1), true};
    BoundRecord p1C{"pos1_upper", 0, Vec(n1), true};
    BoundRecord p1nd{"pos1_normal_defect", 0, Vec(n1), true};
    BoundRecord k1dev{"k1coeffs_dev", 0, Vec(n1), true};
    BoundRecord ps0{"ps0lbd", std::numeric_limits<double>::infinity(), Vec(n1), true};
    BoundRecord bgood{"bgood", 0, Vec(n1), true};
    BoundRecord blockinv{"block_inverse_dev", 0, Vec(n1), true};
    BoundRecord isom{"isometry_dev", 0, Vec(n1), true};

    double fd = chart.fd_step_;
    for (int trial = 0; trial < point_samples; ++trial) {
        Vec y(n1);
        y[0] = rng.uniform(-chart.T1, chart.T1);
        y[1] = rng.uniform(0, 1);
        double rnu = 0;
        if (chart.k == 1) {
            y[2] = rng.uniform(-chart.rho0, chart.rho0);
            rnu = std::abs(y[2]);
        } else {
            double r = chart.rho0 * std::sqrt(rng.uniform());
            double th = rng.uniform(0, 2 * PI);
            y[2] = r * std::cos(th);
            y[3] = r * std::sin(th);
            rnu = r;
        }
        MetricData md = chart.metric_at(y);

        // W^{1,inf} of g^{alpha beta}: values plus y0-derivative by FD
        Vec yp = y, ym = y;
        yp[0] += fd;
        ym[0] -= fd;
        MetricData mdp = chart.metric_at(yp), mdm = chart.metric_at(ym);
        Mat dG0 = (1.0 / (2 * fd)) * (mdp.Ginv - mdm.Ginv);
        double val = std::max(max_abs(md.Ginv), max_abs(dG0));
        if (val > w1inf.constant) {
            w1inf.constant = val;
            w1inf.worst_point = y;
        }

        // psi^0 slope
        double slope = chart.psi0_dy0(y);
        if (slope < ps0.constant) {
            ps0.constant = slope;
            ps0.worst_point = y;
        }

        // b^nu vs |y^nu| (the minimality consequence, away from Gamma)
        if (rnu > 0.05 * chart.rho0) {
            double bnu = 0;
            for (int c = 2; c < n1; ++c) bnu = std::max(bnu, std::abs(md.b[c]));
            double ratio = bnu / rnu;
            if (ratio > bgood.constant) {
                bgood.constant = ratio;
                bgood.worst_point = y;
            }
        }

        // block inverse identity (partitioned formula vs direct inverse)
        {
            Mat A(2, 2), Bm(2, chart.k), Cm(chart.k, 2), Dm(chart.k, chart.k);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) A(i, j) = md.G(i, j);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < chart.k; ++j) Bm(i, j) = md.G(i, 2 + j);
            for (int i = 0; i < chart.k; ++i)
                for (int j = 0; j < 2; ++j) Cm(i, j) = md.G(2 + i, j);
            for (int i = 0; i < chart.k; ++i)
                for (int j = 0; j < chart.k; ++j) Dm(i, j) = md.G(2 + i, 2 + j);
            Mat Dinv = inverse(Dm), Ainv = inverse(A);
            Mat TL = inverse(A - Bm * Dinv * Cm);
            Mat BR = inverse(Dm - Cm * Ainv * Bm);
            Mat TR = (-1.0) * (Ainv * (Bm * BR));
            Mat BL = (-1.0) * (Dinv * (Cm * TL));
            Mat Nfull(n1, n1);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) Nfull(i, j) = TL(i, j);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < chart.k; ++j) Nfull(i, 2 + j) = TR(i, j);
            for (int i = 0; i < chart.k; ++i)
                for (int j = 0; j < 2; ++j) Nfull(2 + i, j) = BL(i, j);
            for (int i = 0; i < chart.k; ++i)
                for (int j = 0; j < chart.k; ++j) Nfull(2 + i, 2 + j) = BR(i, j);
            double dev = max_abs(Nfull - md.Ginv);
            if (dev > blockinv.constant) {
                blockinv.constant = dev;
                blockinv.worst_point = y;
            }
        }

        // isometry: (Dpsi w)^T eta (Dpsi w) = w^T G w
        {
            Mat D = chart.dpsi(y);
            Vec w(n1);
            for (int c = 0; c < n1; ++c) w[c] = rng.uniform(-1, 1);
            Vec Dw = D * w;
            double lhs = mdot(Dw, Dw);
            double rhs = 0;
            for (int i = 0; i < n1; ++i)
                for (int j = 0; j < n1; ++j) rhs += w[i] * md.G(i, j) * w[j];
            double dev = std::abs(lhs - rhs);
            if (dev > isom.constant) {
                isom.constant = dev;
                isom.worst_point = y;
            }
        }

        if (chart.k == 1) {
            for (int al = 0; al < n1; ++al) {
                double target = al == n1 - 1 ? 1.0 : 0.0;
                double dev = std::abs(md.Ginv(al, n1 - 1) - target);
                if (dev > k1dev.constant) {
                    k1dev.constant = dev;
                    k1dev.worst_point = y;
                }
            }
        }

        for (int xs = 0; xs < xi_samples; ++xs) {
            Vec xi(n1);
            for (int c = 0; c < n1; ++c) xi[c] = rng.uniform(-1, 1);
            double nxi = norm(xi);
            if (nxi < 1e-9) continue;
            xi *= 1.0 / nxi;
            double xtau2 = xi[0] * xi[0] + xi[1] * xi[1];
            double xnu2 = 0;
            for (int c = 2; c < n1; ++c) xnu2 += xi[c] * xi[c];

            double axx = 0, dGxx = 0;
            Vec gxi(n1);
            for (int i = 0; i < n1; ++i) {
                double gi = 0;
                for (int j = 0; j < n1; ++j) {
                    axx += md.a(i, j) * xi[i] * xi[j];
                    dGxx += dG0(i, j) * xi[i] * xi[j];
                    gi += md.Ginv(i, j) * xi[j];
                }
                gxi[i] = gi;
            }

            double denom2 = xtau2 + rnu * rnu * xnu2;
            if (denom2 > 1e-10) {
                double r1 = dGxx / denom2;
                if (r1 > c1y0.constant) {
                    c1y0.constant = r1;
                    c1y0.worst_point = y;
                }
                double r2c = 0;
                for (int be = 0; be < n1; ++be) r2c += md.b[be] * xi[be];
                r2c = r2c * xi[0] / denom2;
                if (r2c > c2.constant) {
                    c2.constant = r2c;
                    c2.worst_point = y;
                }
            }
            double denom1 = std::sqrt(xtau2) + rnu * std::sqrt(xnu2);
            if (denom1 > 1e-6) {
                for (int al = 0; al < 2; ++al) {
                    double r3 = std::abs(gxi[al]) / denom1;
                    if (r3 > c3.constant) {
                        c3.constant = r3;
                        c3.worst_point = y;
                    }
                }
            }
            double quot = axx;  // |xi| = 1
            if (quot < p1c.constant) {
                p1c.constant = quot;
                p1c.worst_point = y;
            }
            if (quot > p1C.constant) {
                p1C.constant = quot;
                p1C.worst_point = y;
            }
            // normal-block defect: (|xi_nu|^2 - a(xi_nu,xi_nu)) / (r^2 |xi_nu|^2)
            if (rnu > 0.05 * chart.rho0) {
                Vec xin(n1);
                for (int c = 2; c < n1; ++c) xin[c] = xi[c];
                if (xnu2 > 1e-6) {
                    double ann = 0;
                    for (int i = 0; i < n1; ++i)
                        for (int j = 0; j < n1; ++j) ann += md.a(i, j) * xin[i] * xin[j];
                    double defect = std::abs(ann - xnu2) / (rnu * rnu * xnu2);
                    if (defect > p1nd.constant) {
                        p1nd.constant = defect;
                        p1nd.worst_point = y;
                    }
                }
            }
        }
    }

    // minimality residual on y^nu = 0
    {
        double worst = 0;
        Vec at(n1);
        int mt = 33, ms = 64;
        for (int it = 0; it < mt; ++it) {
            double t = -chart.T1 + 2 * chart.T1 * it / (mt - 1);
            for (int is = 0; is < ms; ++is) {
                double y1 = static_cast<double>(is) / ms;
                double r = chart.minimality_residual(t, y1);
                if (r > worst) {
                    worst = r;
                    at = Vec(n1);
                    at[0] = t;
                    at[1] = y1;
                }
            }
        }
        rep.minimality_residual = worst;
        rep.minimality_worst = at;
    }

    ps0.pass = ps0.constant > 0;
    p1c.pass = p1c.constant > 0;
    for (auto* r : {&w1inf, &c1y0, &c2, &c3, &p1c, &p1C, &p1nd, &k1dev, &ps0, &bgood, &blockinv,
                    &isom})
        rep.records.push_back(*r);
    for (auto& r : rep.records)
        r.pass = r.pass && std::isfinite(r.constant);

    rep.constants = chart.has_constants() ? chart.constants() : cone_slope(chart);
    return rep;
}

// Eikonal residual of the signed distance by finite differences on a
// space-time stencil (k = 1 charts).
inline double eikonal_residual(const TubularChart& chart, const Vec& tx, double h) {
    auto d_at = [&](const Vec& p) { return chart.signed_distance(p).d; };
    int n1 = chart.dim();
    double dt2 = 0, grad2 = 0;
    for (int c = 0; c < n1; ++c) {
        Vec p = tx, m = tx;
        p[c] += h;
        m[c] -= h;
        double der = (d_at(p) - d_at(m)) / (2 * h);
        if (c == 0)
            dt2 = der * der;
        else
            grad2 += der * der;
    }
    return std::abs(-dt2 + grad2 - 1.0);
}

}  // namespace glwave
