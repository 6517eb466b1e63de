#pragma once

#include <functional>

#include "glwave/math.hpp"

namespace glwave {

// Double-well / Mexican-hat potentials for the semilinear wave equation.
// Scalar targets vanish at +-1, planar-vector targets vanish on the unit
// circle.  Inputs far outside the physical range are clamped before
// evaluation (growth guard); valid runs never trigger the clamp.
struct PotentialModel {
    enum class Kind { Scalar, Vector };

    Kind kind = Kind::Scalar;
    double scale = 1.0;          // multiplies F (and hence f)
    double growth_guard = 10.0;  // clamp |u| at this radius

    mutable bool guard_activated = false;

    static PotentialModel quartic_scalar(double scale = 1.0) {
        PotentialModel m;
        m.kind = Kind::Scalar;
        m.scale = scale;
        return m;
    }
    static PotentialModel quartic_vector(double scale = 1.0) {
        PotentialModel m;
        m.kind = Kind::Vector;
        m.scale = scale;
        return m;
    }

    int target_dim() const { return kind == Kind::Scalar ? 1 : 2; }

    double F1(double s) const {
        double t = s * s - 1;
        return scale * 0.25 * t * t;
    }
    double f1(double s) const { return scale * (s * s - 1) * s; }

    double F(const double* v) const {
        if (kind == Kind::Scalar) return F1(clamp1(v[0]));
        double x = v[0], y = v[1];
        clamp2(x, y);
        double t = x * x + y * y - 1;
        return scale * 0.25 * t * t;
    }
    void grad(const double* v, double* out) const {
        if (kind == Kind::Scalar) {
            out[0] = f1(clamp1(v[0]));
            return;
        }
        double x = v[0], y = v[1];
        clamp2(x, y);
        double t = x * x + y * y - 1;
        out[0] = scale * t * x;
        out[1] = scale * t * y;
    }

   private:
    double clamp1(double s) const {
        if (std::abs(s) > growth_guard) {
            guard_activated = true;
            return std::copysign(growth_guard, s);
        }
        return s;
    }
    void clamp2(double& x, double& y) const {
        double r = std::sqrt(x * x + y * y);
        if (r > growth_guard) {
            guard_activated = true;
            x *= growth_guard / r;
            y *= growth_guard / r;
        }
    }
};

struct PotentialEval {
    double F;
    Vec f;
};

// F and its gradient at one target point; rejects non-finite input.
inline PotentialEval eval_potential(const PotentialModel& model, const Vec& value) {
    require(value.n == model.target_dim(), "eval_potential: dimension mismatch");
    for (int i = 0; i < value.n; ++i)
        require(std::isfinite(value[i]), "eval_potential: non-finite input");
    PotentialEval out;
    out.F = model.F(value.a.data());
    out.f = Vec(value.n);
    model.grad(value.a.data(), out.f.a.data());
    return out;
}

// Sampled validation of the structural assumptions on F.  Constants are
// reported, not asserted: the best c and C found over the sample.
struct PotentialCheck {
    double vacuum_residual;   // max |F| on the vacuum set
    double lower_c;           // best c with c(1-|s|)^2 <= F near the vacuum
    double upper_C;           // best C with F <= C(1-|u|)^2 (vector, |u|<=2)
    double far_floor;         // min F on |u| >= 2 (vector)
    double gradient_mismatch; // max |f - DF_h| over samples (central differences)
};

inline PotentialCheck validate_potential(const PotentialModel& model, int samples = 400) {
    PotentialCheck r{0, std::numeric_limits<double>::infinity(), 0,
                     std::numeric_limits<double>::infinity(), 0};
    double fd = 1e-5;
    if (model.kind == PotentialModel::Kind::Scalar) {
        r.vacuum_residual = std::max(std::abs(model.F1(1.0)), std::abs(model.F1(-1.0)));
        for (int i = 0; i <= samples; ++i) {
            double s = -2.0 + 4.0 * i / samples;
            double gap = (1 - std::abs(s)) * (1 - std::abs(s));
            if (gap > 1e-8) r.lower_c = std::min(r.lower_c, model.F1(s) / gap);
            double num = (model.F1(s + fd) - model.F1(s - fd)) / (2 * fd);
            r.gradient_mismatch = std::max(r.gradient_mismatch, std::abs(num - model.f1(s)));
        }
    } else {
        for (int i = 0; i <= samples; ++i) {
            double th = 2 * PI * i / samples;
            double v[2] = {std::cos(th), std::sin(th)};
            r.vacuum_residual = std::max(r.vacuum_residual, std::abs(model.F(v)));
        }
        for (int i = 0; i <= samples; ++i)
            for (int j = 0; j <= 16; ++j) {
                double rad = 3.0 * i / samples;
                double th = 2 * PI * j / 16;
                double v[2] = {rad * std::cos(th), rad * std::sin(th)};
                double Fv = model.F(v);
                double gap = (1 - rad) * (1 - rad);
                if (rad <= 2.0 && gap > 1e-8) {
                    r.lower_c = std::min(r.lower_c, Fv / gap);
                    r.upper_C = std::max(r.upper_C, Fv / gap);
                }
                if (rad >= 2.0) r.far_floor = std::min(r.far_floor, Fv);
                double g[2], gn[2];
                model.grad(v, g);
                for (int d = 0; d < 2; ++d) {
                    double vp[2] = {v[0], v[1]}, vm[2] = {v[0], v[1]};
                    vp[d] += fd;
                    vm[d] -= fd;
                    gn[d] = (model.F(vp) - model.F(vm)) / (2 * fd);
                    r.gradient_mismatch =
                        std::max(r.gradient_mismatch, std::abs(gn[d] - g[d]));
                }
            }
    }
    return r;
}

}  // namespace glwave
