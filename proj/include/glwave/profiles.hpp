#pragma once

#include <cstdio>
#include <vector>

#include "glwave/potential.hpp"

namespace glwave {

// ---------------------------------------------------------------------------
// 1-D kink profile: the heteroclinic connection solving -q'' + f(q) = 0 with
// q(0) = 0, q(+-inf) = +-1.  The solver integrates the first-integral
// reduction q' = sqrt(2 F(q)) from q(0) = 0 (fourth-order fixed step), which
// is unconditionally stable and enforces the first integral by construction.
// ---------------------------------------------------------------------------

struct KinkProfile {
    double half_width = 0;  // grid covers [-L, L]
    double ds = 0;
    std::vector<double> q;   // samples at s_i = -L + i*ds
    std::vector<double> dq;  // q' samples (= sqrt(2F(q)))
    double ode_residual = 0;
    double first_integral_residual = 0;
    double boundary_gap = 0;  // max(|q(L)-1|, |q(-L)+1|)

    int size() const { return static_cast<int>(q.size()); }
    double grid_s(int i) const { return -half_width + ds * i; }

    double value(double s) const { return eval(q, dq, s); }
    double slope(double s) const { return eval_deriv(q, dq, s); }

   private:
    double eval(const std::vector<double>& f, const std::vector<double>& df, double s) const {
        if (s <= -half_width) return f.front();
        if (s >= half_width) return f.back();
        double t = (s + half_width) / ds;
        int i = std::min(static_cast<int>(t), size() - 2);
        double s0 = grid_s(i), s1 = grid_s(i + 1);
        return hermite(s, s0, s1, f[i], f[i + 1], df[i], df[i + 1]);
    }
    double eval_deriv(const std::vector<double>& f, const std::vector<double>& df,
                      double s) const {
        if (s <= -half_width || s >= half_width) return 0.0;
        double t = (s + half_width) / ds;
        int i = std::min(static_cast<int>(t), size() - 2);
        double s0 = grid_s(i), s1 = grid_s(i + 1);
        return hermite_deriv(s, s0, s1, f[i], f[i + 1], df[i], df[i + 1]);
    }
};

// q'' = f(q) along the profile (chain rule of the first integral)
inline double ddq(const PotentialModel& model, double q) { return model.f1(q); }

inline KinkProfile solve_kink(const PotentialModel& model, double half_width = 12.0,
                              double tol = 1e-8, double ds = 1e-3) {
    require(model.kind == PotentialModel::Kind::Scalar, "solve_kink: scalar model required");
    require(half_width >= 10.0, "solve_kink: domain half-width must be >= 10");

    auto rhs = [&](double q) { return std::sqrt(std::max(0.0, 2.0 * model.F1(q))); };

    int half_n = static_cast<int>(std::llround(half_width / ds));
    ds = half_width / half_n;
    int n = 2 * half_n + 1;
    KinkProfile p;
    p.half_width = half_width;
    p.ds = ds;
    p.q.assign(n, 0.0);

    // RK4 on q' = sqrt(2F(q)) forward from s = 0, then backward; the same
    // right-hand side drives q down to -1 for s < 0.
    p.q[half_n] = 0.0;
    for (int dir = -1; dir <= 1; dir += 2) {
        double q = 0.0, step = dir * ds;
        for (int i = 1; i <= half_n; ++i) {
            double k1 = rhs(q);
            double k2 = rhs(q + 0.5 * step * k1);
            double k3 = rhs(q + 0.5 * step * k2);
            double k4 = rhs(q + step * k3);
            q += step / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            q = std::clamp(q, -1.0, 1.0);
            p.q[half_n + dir * i] = q;
        }
    }
    p.dq.resize(n);
    for (int i = 0; i < n; ++i) p.dq[i] = rhs(p.q[i]);

    p.boundary_gap = std::max(std::abs(p.q.back() - 1.0), std::abs(p.q.front() + 1.0));

    // Residuals measured off-sample (midpoints), where the Hermite
    // interpolant carries real information.
    double r_fi = 0, r_ode = 0;
    for (int i = 0; i < n - 1; ++i) {
        double s = p.grid_s(i) + 0.5 * ds;
        double qv = p.value(s);
        double qp = p.slope(s);
        r_fi = std::max(r_fi, std::abs(qp - rhs(qv)));
        // q'' obtained from the Hermite interpolant of the q' samples
        double qpp = hermite_deriv(s, p.grid_s(i), p.grid_s(i + 1), p.dq[i], p.dq[i + 1],
                                   ddq(model, p.q[i]), ddq(model, p.q[i + 1]));
        r_ode = std::max(r_ode, std::abs(-qpp + model.f1(qv)));
    }
    p.first_integral_residual = r_fi;
    p.ode_residual = r_ode;
    require(r_fi <= tol, "solve_kink: first-integral residual " + std::to_string(r_fi) +
                             " above tolerance");
    require(r_ode <= tol, "solve_kink: ODE residual " + std::to_string(r_ode) +
                              " above tolerance");
    return p;
}

// ---------------------------------------------------------------------------
// Surface tension kappa_1 = int_{-1}^{1} sqrt(2 F(s)) ds.
// ---------------------------------------------------------------------------

struct SurfaceTension {
    double kappa1;
    double quadrature_error;
};

inline SurfaceTension surface_tension(const PotentialModel& model) {
    require(model.kind == PotentialModel::Kind::Scalar, "surface_tension: scalar model required");
    auto integrand = [&](double s) { return std::sqrt(std::max(0.0, 2.0 * model.F1(s))); };
    QuadResult q = integrate(integrand, -1.0, 1.0, 1e-13);
    require(q.error_estimate < 1e-10, "surface_tension: quadrature failed to converge");
    require(q.value > 0, "surface_tension: kappa1 must be positive");
    return {q.value, q.error_estimate};
}

// delta_eps normalization: eps/kappa1 for k=1, 1/(pi |ln eps|) for k=2.
inline double delta_eps(int k, double eps, double kappa1) {
    return k == 1 ? eps / kappa1 : 1.0 / (PI * std::abs(std::log(eps)));
}

// ---------------------------------------------------------------------------
// Truncated profile: identical to the kink for |s| < rho0/3 (physical
// units), exactly sign(s) for |s| > 2 rho0/3, C^1 cubic blend between.
// ---------------------------------------------------------------------------

struct TruncatedProfile {
    const KinkProfile* base = nullptr;
    double eps = 0;
    double rho0 = 0;
    double inner_band = 0;  // rho0/(3 eps), profile units
    double outer_band = 0;  // 2 rho0/(3 eps)

    // Convex blend q~ = (1-theta) q + theta sign with a C^2 smoothstep
    // theta; monotone because theta' >= 0 and |q| <= 1.
    double value(double sigma) const {
        double as = std::abs(sigma);
        if (as >= outer_band) return sigma >= 0 ? 1.0 : -1.0;
        if (as <= inner_band) return base->value(sigma);
        double th = smoothstep((as - inner_band) / (outer_band - inner_band));
        double sgn = sigma >= 0 ? 1.0 : -1.0;
        return (1 - th) * base->value(sigma) + th * sgn;
    }
    double slope(double sigma) const {
        double as = std::abs(sigma);
        if (as >= outer_band) return 0.0;
        if (as <= inner_band) return base->slope(sigma);
        double t = (as - inner_band) / (outer_band - inner_band);
        double th = smoothstep(t);
        double dth = smoothstep_deriv(t) / (outer_band - inner_band);
        double sgn = sigma >= 0 ? 1.0 : -1.0;
        // d/d|s| applied with the sign flip for sigma < 0
        return (1 - th) * base->slope(sigma) + sgn * dth * (sgn - base->value(sigma));
    }
    static double smoothstep(double t) { return t * t * t * (10 + t * (-15 + 6 * t)); }
    static double smoothstep_deriv(double t) { return 30 * t * t * (1 - t) * (1 - t); }
    // physical-units value at signed distance d: value(d/eps)
    double at_distance(double d) const { return value(d / eps); }

    // int (q'^2/2 + F(q)) over the line, in profile units
    double line_energy(const PotentialModel& model) const {
        auto e = [&](double s) {
            double qp = slope(s), qv = value(s);
            return 0.5 * qp * qp + model.F1(qv);
        };
        return integrate(e, -outer_band - 1, outer_band + 1, 1e-13).value;
    }
    double sup_distance_to_base() const {
        double m = 0;
        for (int i = 0; i <= 4000; ++i) {
            double s = -outer_band - 1 + (2 * outer_band + 2) * i / 4000.0;
            double ref = std::abs(s) > base->half_width ? (s > 0 ? 1.0 : -1.0) : base->value(s);
            m = std::max(m, std::abs(value(s) - ref));
        }
        return m;
    }
};

inline TruncatedProfile truncate_kink(const KinkProfile& profile, double rho0, double eps) {
    require(eps > 0 && eps <= 1, "truncate_kink: eps in (0,1] required");
    require(rho0 > 0, "truncate_kink: rho0 > 0 required");
    require(rho0 / eps >= 10.0,
            "truncate_kink: rho0/eps below 10 profile units; truncation error would not be "
            "exponentially small");
    TruncatedProfile t;
    t.base = &profile;
    t.eps = eps;
    t.rho0 = rho0;
    t.inner_band = rho0 / (3 * eps);
    t.outer_band = 2 * rho0 / (3 * eps);
    return t;
}

// ---------------------------------------------------------------------------
// Degree-1 vortex profile q(s) = s min(1, 1/|s|), s in R^2.
// ---------------------------------------------------------------------------

inline Vec vortex_profile(const Vec& s) {
    double r = std::sqrt(s[0] * s[0] + s[1] * s[1]);
    if (r <= 1.0) return Vec{s[0], s[1]};
    return Vec{s[0] / r, s[1] / r};
}

// Jacobian matrix of the vortex profile (2x2), for chain-rule data.
inline Mat vortex_profile_jacobian(const Vec& s) {
    Mat J(2, 2);
    double r2 = s[0] * s[0] + s[1] * s[1];
    double r = std::sqrt(r2);
    if (r <= 1.0) {
        J(0, 0) = J(1, 1) = 1;
        return J;
    }
    // d/ds (s/|s|) = I/r - s s^T / r^3
    J(0, 0) = 1 / r - s[0] * s[0] / (r2 * r);
    J(1, 1) = 1 / r - s[1] * s[1] / (r2 * r);
    J(0, 1) = J(1, 0) = -s[0] * s[1] / (r2 * r);
    return J;
}

// Ginzburg-Landau energy of the vortex profile over the disk B(R), in
// profile units: int_{B(R)} |grad q|^2/2 + F(q).  Closed-form radial
// reduction, used as an oracle for the normalized disk energy.
inline double vortex_disk_energy(const PotentialModel& model, double R) {
    require(model.kind == PotentialModel::Kind::Vector, "vortex_disk_energy: vector model");
    auto inner = [&](double r) {
        // |grad q|^2 = 2 inside the unit disk (identity map)
        double v[2] = {r, 0};
        return (1.0 + model.F(v)) * 2 * PI * r;
    };
    double Ein = integrate(inner, 0.0, std::min(R, 1.0), 1e-12).value;
    double Eout = R > 1.0 ? PI * std::log(R) : 0.0;  // |grad (s/|s|)|^2 = 1/r^2
    return Ein + Eout;
}

// ---------------------------------------------------------------------------
// CSV export: two columns (s, q(s)), 17 significant digits.
// ---------------------------------------------------------------------------

inline void profile_to_csv(const KinkProfile& p, const std::string& path, int stride = 1) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    require(f != nullptr, "profile_to_csv: cannot open " + path);
    std::fprintf(f, "s,q\n");
    for (int i = 0; i < p.size(); i += stride)
        std::fprintf(f, "%.17g,%.17g\n", p.grid_s(i), p.q[i]);
    std::fclose(f);
}

}  // namespace glwave
