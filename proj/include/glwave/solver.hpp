#pragma once

#include <deque>

#include "glwave/grid.hpp"
#include "glwave/potential.hpp"

namespace glwave {

// Explicit leapfrog for  u_tt = Lap u - f(u)/eps^2  on a periodic grid.
// dt = min(CFL h, eps/4); the stiff term is resolved rather than damped,
// which keeps the scheme exactly time reversible.
struct SolverConfig {
    double cfl = 0.5;
    double t_end = 1.0;
    double snapshot_cadence = 0.01;  // probes fire at this cadence
    int retain_every = 5;            // keep every n-th snapshot in the trajectory
    PotentialModel potential = PotentialModel::quartic_scalar();
    bool fourth_order = false;
    int threads = 0;

    void validate(double eps, double hmin) const {
        require(cfl > 0 && cfl < 1, "SolverConfig: CFL must lie in (0,1)");
        double dt = std::min(cfl * hmin, eps / 4);
        require(dt > 0, "SolverConfig: degenerate step");
        require(t_end >= 0, "SolverConfig: t_end must be nonnegative");
    }
};

struct BlowUpError : GlwError {
    BlowUpError(const std::string& msg) : GlwError(msg) {}
};

class LeapfrogStepper {
   public:
    LeapfrogStepper(const FieldState& initial, const SolverConfig& cfg)
        : grid_(initial.grid), k_(initial.k), eps_(initial.eps), cfg_(cfg) {
        cfg.validate(eps_, grid_.min_spacing());
        dt_raw_ = std::min(cfg.cfl * grid_.min_spacing(), eps_ / 4);
        steps_per_snap_ = std::max(1, static_cast<int>(std::ceil(cfg.snapshot_cadence / dt_raw_)));
        dt_ = cfg.snapshot_cadence / steps_per_snap_;
        t0_ = initial.time;
        t_ = t0_;
        nstep_ = 0;
        std::size_t n = grid_.node_count();
        for (int c = 0; c < k_; ++c) {
            cur_[c] = initial.u[c];
            prev_[c].resize(n);
        }
        // synthetic backward step: u(-dt) = u - dt u_t + dt^2/2 (Lap u - f/eps^2)
        const FieldState& s = initial;
        for (int c = 0; c < k_; ++c) {
            auto& pc = prev_[c];
            parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    double acc = accel(s.u, i, c);
                    pc[i] = s.u[c][i] - dt_ * s.ut[c][i] + 0.5 * dt_ * dt_ * acc;
                }
            }, cfg_.threads);
        }
        rows_ = grid_.cells[0];
        row_len_ = n / rows_;
        energy_ledger_.push_back(energy_of(initial));
    }

    double dt() const { return dt_; }
    double time() const { return t_; }
    long steps() const { return nstep_; }
    int steps_per_snapshot() const { return steps_per_snap_; }
    const std::vector<double>& ledger() const { return energy_ledger_; }

    // one leapfrog step; optionally emits the post-step snapshot of the new
    // current time level with a time-centered velocity
    void step(FieldState* emit = nullptr) {
        std::size_t n = grid_.node_count();
        if (emit) {
            emit->grid = grid_;
            emit->k = k_;
            emit->eps = eps_;
            for (int c = 0; c < k_; ++c) {
                if (emit->u[c].size() != n) emit->u[c].assign(n, 0.0);
                if (emit->ut[c].size() != n) emit->ut[c].assign(n, 0.0);
            }
        }
        std::vector<double> row_energy(rows_, 0.0);
        std::vector<int> bad_row(rows_, -1);
        double dt2 = dt_ * dt_;
        double vol = grid_.cell_volume();
        // in place: prev becomes next, node by node
        parallel_for(rows_, [&](std::size_t rlo, std::size_t rhi) {
            double val[2], grad2, ek;
            for (std::size_t r = rlo; r < rhi; ++r) {
                double esum = 0;
                for (std::size_t q = 0; q < row_len_; ++q) {
                    std::size_t i = r * row_len_ + q;
                    grad2 = 0;
                    ek = 0;
                    for (int c = 0; c < k_; ++c) {
                        double lap = laplacian(cur_, i, c, &grad2);
                        val[c] = cur_[c][i];
                        double a = lap - inv_eps2() * fprime(val, c);
                        double unew = 2 * cur_[c][i] - prev_[c][i] + dt2 * a;
                        double utc = (unew - prev_[c][i]) / (2 * dt_);
                        ek += 0.5 * utc * utc;
                        if (emit) {
                            emit->u[c][i] = cur_[c][i];
                            emit->ut[c][i] = utc;
                        }
                        prev_[c][i] = unew;
                        if (!std::isfinite(unew) && bad_row[r] < 0)
                            bad_row[r] = static_cast<int>(q);
                    }
                    esum += ek + 0.5 * grad2 + inv_eps2() * Fval(val);
                }
                row_energy[r] = esum * vol;
            }
        }, cfg_.threads);
        for (std::size_t r = 0; r < rows_; ++r)
            if (bad_row[r] >= 0) {
                throw BlowUpError("wave_solver: non-finite value at step " +
                                  std::to_string(nstep_ + 1) + ", node (" + std::to_string(r) +
                                  "," + std::to_string(bad_row[r]) + ")");
            }
        energy_ledger_.push_back(tree_sum(row_energy));
        for (int c = 0; c < k_; ++c) cur_[c].swap(prev_[c]);
        ++nstep_;
        t_ = t0_ + nstep_ * dt_;
        if (emit) emit->time = t_ - dt_;
    }

    // reverse the arrow of time: swap the two stored levels
    void reverse() { for (int c = 0; c < k_; ++c) cur_[c].swap(prev_[c]); }

    FieldState state() const {
        FieldState s(grid_, k_, eps_, t_);
        std::size_t n = grid_.node_count();
        for (int c = 0; c < k_; ++c) {
            s.u[c] = cur_[c];
            // u_t(t) = (u - u_prev)/dt + dt/2 accel(u): second order one-sided
            parallel_for(n, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    double a = accel(cur_, i, c);
                    s.ut[c][i] = (cur_[c][i] - prev_[c][i]) / dt_ + 0.5 * dt_ * a;
                }
            }, cfg_.threads);
        }
        return s;
    }

    double energy_of(const FieldState& s) const {
        std::vector<double> row_energy(rows_ ? rows_ : s.grid.cells[0], 0.0);
        std::size_t rows = s.grid.cells[0];
        std::size_t rl = s.grid.node_count() / rows;
        row_energy.assign(rows, 0.0);
        double vol = s.grid.cell_volume();
        parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
            double val[2];
            for (std::size_t r = rlo; r < rhi; ++r) {
                double esum = 0;
                for (std::size_t q = 0; q < rl; ++q) {
                    std::size_t i = r * rl + q;
                    double grad2 = 0, ek = 0;
                    for (int c = 0; c < k_; ++c) {
                        laplacian_of(s.u, i, c, &grad2);
                        val[c] = s.u[c][i];
                        ek += 0.5 * s.ut[c][i] * s.ut[c][i];
                    }
                    esum += ek + 0.5 * grad2 + inv_eps2() * Fval(val);
                }
                row_energy[r] = esum * vol;
            }
        }, cfg_.threads);
        return tree_sum(row_energy);
    }

   private:
    double inv_eps2() const { return 1.0 / (eps_ * eps_); }
    double Fval(const double* v) const { return cfg_.potential.F(v); }
    double fprime(const double* v, int c) const {
        double g[2];
        cfg_.potential.grad(v, g);
        return g[c];
    }

    double laplacian(const std::array<std::vector<double>, 2>& f, std::size_t idx, int c,
                     double* grad2_acc) const {
        return laplacian_of(f, idx, c, grad2_acc);
    }
    double laplacian_of(const std::array<std::vector<double>, 2>& f, std::size_t idx, int c,
                        double* grad2_acc) const {
        int id[3];
        grid_.unindex(idx, id);
        double lap = 0;
        for (int d = 0; d < grid_.nd; ++d) {
            double h = grid_.spacing(d);
            int ip[3] = {id[0], id[1], id[2]}, im[3] = {id[0], id[1], id[2]};
            ip[d] += 1;
            im[d] -= 1;
            double up = f[c][grid_.index(ip[0], ip[1], ip[2])];
            double um = f[c][grid_.index(im[0], im[1], im[2])];
            double uc = f[c][idx];
            if (!cfg_.fourth_order) {
                lap += (up - 2 * uc + um) / (h * h);
            } else {
                int ip2[3] = {id[0], id[1], id[2]}, im2[3] = {id[0], id[1], id[2]};
                ip2[d] += 2;
                im2[d] -= 2;
                double up2 = f[c][grid_.index(ip2[0], ip2[1], ip2[2])];
                double um2 = f[c][grid_.index(im2[0], im2[1], im2[2])];
                lap += (-up2 + 16 * up - 30 * uc + 16 * um - um2) / (12 * h * h);
            }
            if (grad2_acc) {
                double g = (up - um) / (2 * h);
                *grad2_acc += g * g;
            }
        }
        return lap;
    }

    double accel(const std::array<std::vector<double>, 2>& f, std::size_t i, int c) const {
        double v[2] = {f[0][i], k_ > 1 ? f[1][i] : 0.0};
        return laplacian_of(f, i, c, nullptr) - inv_eps2() * fprime(v, c);
    }

    GridSpec grid_;
    int k_;
    double eps_;
    SolverConfig cfg_;
    double dt_ = 0, dt_raw_ = 0, t_ = 0, t0_ = 0;
    int steps_per_snap_ = 1;
    long nstep_ = 0;
    std::size_t rows_ = 1, row_len_ = 1;
    std::array<std::vector<double>, 2> cur_, prev_;
    std::vector<double> energy_ledger_;
};

// Total energy of a snapshot: grid sum of e_eps = |u_t|^2/2 + |grad u|^2/2 + F/eps^2.
inline double total_energy(const FieldState& s,
                           const PotentialModel& model = PotentialModel::quartic_scalar(),
                           int threads = 0) {
    SolverConfig cfg;
    cfg.potential = model;
    cfg.t_end = 0;
    cfg.threads = threads;
    LeapfrogStepper st(s, cfg);
    return st.energy_of(s);
}

// ---------------------------------------------------------------------------
// Trajectory: retained snapshots plus the per-step energy ledger.  Probes
// observe every fine-cadence snapshot without forcing them to be stored.
// ---------------------------------------------------------------------------

struct Trajectory {
    double dt = 0;
    long steps = 0;
    std::vector<double> energy_ledger;
    std::vector<FieldState> snapshots;  // retained at cfg.retain_every cadence
};

using SnapshotProbe = std::function<void(const FieldState&)>;

inline Trajectory run(const FieldState& initial, const SolverConfig& cfg,
                      const std::vector<SnapshotProbe>& probes = {}) {
    require(initial.finite(), "run: non-finite initial state");
    Trajectory tr;
    LeapfrogStepper st(initial, cfg);
    tr.dt = st.dt();
    long n_snaps = std::llround(cfg.t_end / cfg.snapshot_cadence);
    tr.snapshots.push_back(initial);
    for (const auto& p : probes) p(initial);
    // the centered-velocity snapshot of level n is produced while computing
    // level n+1, so the loop runs one step past the last snapshot time
    long per = st.steps_per_snapshot();
    long total_steps = n_snaps * per;
    FieldState scratch;
    for (long m = 1; m <= total_steps + 1; ++m) {
        long emitted_level = m - 1;
        bool emit = emitted_level > 0 && emitted_level % per == 0;
        st.step(emit ? &scratch : nullptr);
        if (emit) {
            long snap = emitted_level / per;
            for (const auto& p : probes) p(scratch);
            if (snap % cfg.retain_every == 0 || snap == n_snaps) tr.snapshots.push_back(scratch);
        }
    }
    tr.steps = st.steps();
    tr.energy_ledger = st.ledger();
    return tr;
}

// ---------------------------------------------------------------------------
// Finite propagation speed check.  Region A is a union of grid-aligned
// boxes; A_s is the inward erosion by Euclidean distance s.  Verifies
//   int_{A_{|b-a|}} e(b)  <=  int_A e(a) + tolerance.
// ---------------------------------------------------------------------------

struct Box {
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{0, 0, 0};
};

namespace detail {
// 1-D squared distance transform (lower envelope of parabolas)
inline void edt_pass(std::vector<double>& f, std::vector<double>& scratch, int n, double h) {
    static thread_local std::vector<int> v;
    static thread_local std::vector<double> z;
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    int kk = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    auto sq = [](double x) { return x * x; };
    for (int q = 1; q < n; ++q) {
        double s = 0;
        while (true) {
            int p = v[kk];
            s = ((f[q] + sq(q * h)) - (f[p] + sq(p * h))) / (2 * h * (q - p));
            if (s <= z[kk]) {
                --kk;
            } else {
                break;
            }
        }
        ++kk;
        v[kk] = q;
        z[kk] = s;
        z[kk + 1] = std::numeric_limits<double>::infinity();
    }
    kk = 0;
    for (int q = 0; q < n; ++q) {
        while (z[kk + 1] < q * h) ++kk;
        scratch[q] = sq((q - v[kk]) * h) + f[v[kk]];
    }
    for (int q = 0; q < n; ++q) f[q] = scratch[q];
}
}  // namespace detail

struct LightConeReport {
    double energy_late_eroded = 0;
    double energy_early = 0;
    double margin = 0;  // late - early (should be <= tolerance)
    bool pass = false;
};

inline LightConeReport light_cone_check(const FieldState& early, const FieldState& late,
                                        const std::vector<Box>& region, const PotentialModel& model,
                                        double tolerance, double extra_cells = 2.0) {
    const GridSpec& g = early.grid;
    require(late.grid.node_count() == g.node_count(), "light_cone_check: grid mismatch");
    double s_erode = std::abs(late.time - early.time) + extra_cells * g.max_spacing();

    std::size_t n = g.node_count();
    // inside(A): squared distance to the complement
    std::vector<double> dist2(n);
    const double INF = 1e30;
    for (std::size_t i = 0; i < n; ++i) {
        int id[3];
        g.unindex(i, id);
        bool in = false;
        for (const auto& b : region) {
            bool inside = true;
            for (int d = 0; d < g.nd; ++d) {
                double x = g.coord(id[d], d);
                if (x < b.lo[d] || x > b.hi[d]) inside = false;
            }
            if (inside) in = true;
        }
        dist2[i] = in ? INF : 0.0;
    }
    // separable EDT
    if (g.nd == 2) {
        int nx = g.cells[0], ny = g.cells[1];
        std::vector<double> line(std::max(nx, ny)), scratch(std::max(nx, ny));
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) line[j] = dist2[g.index(i, j)];
            detail::edt_pass(line, scratch, ny, g.spacing(1));
            for (int j = 0; j < ny; ++j) dist2[g.index(i, j)] = line[j];
        }
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) line[i] = dist2[g.index(i, j)];
            detail::edt_pass(line, scratch, nx, g.spacing(0));
            for (int i = 0; i < nx; ++i) dist2[g.index(i, j)] = line[i];
        }
    } else if (g.nd == 3) {
        int nx = g.cells[0], ny = g.cells[1], nz = g.cells[2];
        int mx = std::max(nx, std::max(ny, nz));
        std::vector<double> line(mx), scratch(mx);
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                for (int kk = 0; kk < nz; ++kk) line[kk] = dist2[g.index(i, j, kk)];
                detail::edt_pass(line, scratch, nz, g.spacing(2));
                for (int kk = 0; kk < nz; ++kk) dist2[g.index(i, j, kk)] = line[kk];
            }
        for (int i = 0; i < nx; ++i)
            for (int kk = 0; kk < nz; ++kk) {
                for (int j = 0; j < ny; ++j) line[j] = dist2[g.index(i, j, kk)];
                detail::edt_pass(line, scratch, ny, g.spacing(1));
                for (int j = 0; j < ny; ++j) dist2[g.index(i, j, kk)] = line[j];
            }
        for (int j = 0; j < ny; ++j)
            for (int kk = 0; kk < nz; ++kk) {
                for (int i = 0; i < nx; ++i) line[i] = dist2[g.index(i, j, kk)];
                detail::edt_pass(line, scratch, nx, g.spacing(0));
                for (int i = 0; i < nx; ++i) dist2[g.index(i, j, kk)] = line[i];
            }
    } else {
        throw GlwError("light_cone_check: 2-D or 3-D grids only");
    }

    // masked energies (deterministic per-row sums)
    auto masked_energy = [&](const FieldState& s, double min_dist) {
        std::size_t rows = g.cells[0];
        std::size_t rl = n / rows;
        std::vector<double> row_sum(rows, 0.0);
        double vol = g.cell_volume();
        double md2 = min_dist * min_dist;
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = 0;
            for (std::size_t q = 0; q < rl; ++q) {
                std::size_t i = r * rl + q;
                if (dist2[i] <= md2) continue;
                int id[3];
                g.unindex(i, id);
                double grad2 = 0, ek = 0;
                double val[2];
                for (int c = 0; c < s.k; ++c) {
                    double gvec[3];
                    s.gradient(c, id[0], id[1], id[2], gvec);
                    for (int d = 0; d < g.nd; ++d) grad2 += gvec[d] * gvec[d];
                    ek += 0.5 * s.ut[c][i] * s.ut[c][i];
                    val[c] = s.u[c][i];
                }
                acc += ek + 0.5 * grad2 + model.F(val) / (s.eps * s.eps);
            }
            row_sum[r] = acc * vol;
        }
        return tree_sum(row_sum);
    };

    LightConeReport rep;
    rep.energy_early = masked_energy(early, 0.0);
    rep.energy_late_eroded = masked_energy(late, s_erode);
    rep.margin = rep.energy_late_eroded - rep.energy_early;
    rep.pass = rep.margin <= tolerance;
    return rep;
}

}  // namespace glwave
