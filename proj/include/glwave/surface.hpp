#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "glwave/math.hpp"
#include "json.hpp"

namespace glwave {

// Parametrized timelike surfaces with n = 1: H(y0, y1) = (y0, h(y0, y1)),
// y1 on the unit torus.  Backends supply h and its first derivatives.

struct SurfaceJet {
    Vec h;    // position in R^N
    Vec ht;   // d h / d y0
    Vec hs;   // d h / d y1
};

class SurfaceBackend {
   public:
    virtual ~SurfaceBackend() = default;
    virtual int space_dim() const = 0;
    virtual SurfaceJet eval(double y0, double y1) const = 0;
};

// h given as closures; derivative closures optional (finite differences
// otherwise).
class AnalyticSurface final : public SurfaceBackend {
   public:
    using Fn = std::function<Vec(double, double)>;
    AnalyticSurface(int N, Fn h, Fn ht = nullptr, Fn hs = nullptr)
        : N_(N), h_(std::move(h)), ht_(std::move(ht)), hs_(std::move(hs)) {}
    int space_dim() const override { return N_; }
    SurfaceJet eval(double y0, double y1) const override {
        SurfaceJet j;
        j.h = h_(y0, y1);
        const double d = 1e-6;
        if (ht_) {
            j.ht = ht_(y0, y1);
        } else {
            j.ht = (1.0 / (2 * d)) * (h_(y0 + d, y1) - h_(y0 - d, y1));
        }
        if (hs_) {
            j.hs = hs_(y0, y1);
        } else {
            j.hs = (1.0 / (2 * d)) * (h_(y0, y1 + d) - h_(y0, y1 - d));
        }
        return j;
    }

   private:
    int N_;
    Fn h_, ht_, hs_;
};

// ---------------------------------------------------------------------------
// d'Alembert generators: unit-speed curves a, b with
// x(s,t) = (a(s+t) + b(s-t)) / 2.  Sampled over one period with an optional
// linear winding (open strings periodic up to a translation).
// ---------------------------------------------------------------------------

struct DalembertGenerators {
    int N = 2;
    double period = 0;  // parameter length of one turn
    double sigma0 = 0;  // parameter value mapped to y1 = 0
    std::vector<Vec> a, da, b, db;
    Vec wind_a, wind_b;  // f(xi + period) = f(xi) + wind
    double unit_speed_residual = 0;

    int size() const { return static_cast<int>(a.size()); }

    Vec eval(const std::vector<Vec>& f, const std::vector<Vec>& df, const Vec& wind,
             double xi) const {
        double turns = std::floor(xi / period);
        double r = xi - turns * period;
        int m = size();
        double t = r / period * m;
        int i = std::min(static_cast<int>(t), m - 1);
        double x0 = period * i / m, x1 = period * (i + 1) / m;
        int ip = (i + 1) % m;
        Vec f1 = f[ip];
        if (ip == 0) f1 += wind;
        Vec out(N);
        for (int c = 0; c < N; ++c)
            out[c] = hermite(r, x0, x1, f[i][c], f1[c], df[i][c], df[ip][c]);
        return out + turns * wind;
    }
    Vec eval_deriv(const std::vector<Vec>& f, const std::vector<Vec>& df, const Vec& wind,
                   double xi) const {
        double turns = std::floor(xi / period);
        double r = xi - turns * period;
        int m = size();
        double t = r / period * m;
        int i = std::min(static_cast<int>(t), m - 1);
        double x0 = period * i / m, x1 = period * (i + 1) / m;
        int ip = (i + 1) % m;
        Vec f1 = f[ip];
        if (ip == 0) f1 += wind;
        Vec out(N);
        for (int c = 0; c < N; ++c)
            out[c] = hermite_deriv(r, x0, x1, f[i][c], f1[c], df[i][c], df[ip][c]);
        return out;
    }

    Vec a_at(double xi) const { return eval(a, da, wind_a, xi); }
    Vec b_at(double xi) const { return eval(b, db, wind_b, xi); }
    Vec da_at(double xi) const { return eval_deriv(a, da, wind_a, xi); }
    Vec db_at(double xi) const { return eval_deriv(b, db, wind_b, xi); }

    Vec position(double sigma, double t) const { return 0.5 * (a_at(sigma + t) + b_at(sigma - t)); }
    Vec velocity(double sigma, double t) const {
        return 0.5 * (da_at(sigma + t) - db_at(sigma - t));
    }
    Vec tangent(double sigma, double t) const {
        return 0.5 * (da_at(sigma + t) + db_at(sigma - t));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["N"] = N;
        j["period"] = period;
        j["sigma0"] = sigma0;
        auto dump = [&](const std::vector<Vec>& v) {
            nlohmann::json arr = nlohmann::json::array();
            for (const Vec& x : v) {
                std::vector<double> row(x.a.begin(), x.a.begin() + x.n);
                arr.push_back(row);
            }
            return arr;
        };
        j["a"] = dump(a);
        j["da"] = dump(da);
        j["b"] = dump(b);
        j["db"] = dump(db);
        j["wind_a"] = std::vector<double>(wind_a.a.begin(), wind_a.a.begin() + N);
        j["wind_b"] = std::vector<double>(wind_b.a.begin(), wind_b.a.begin() + N);
        return j;
    }
    static DalembertGenerators from_json(const nlohmann::json& j) {
        DalembertGenerators g;
        g.N = j["N"].get<int>();
        g.period = j["period"].get<double>();
        g.sigma0 = j["sigma0"].get<double>();
        auto load = [&](const nlohmann::json& arr) {
            std::vector<Vec> out;
            for (const auto& row : arr) {
                Vec v(g.N);
                for (int c = 0; c < g.N; ++c) v[c] = row[c].get<double>();
                out.push_back(v);
            }
            return out;
        };
        g.a = load(j["a"]);
        g.da = load(j["da"]);
        g.b = load(j["b"]);
        g.db = load(j["db"]);
        g.wind_a = Vec(g.N);
        g.wind_b = Vec(g.N);
        for (int c = 0; c < g.N; ++c) {
            g.wind_a[c] = j["wind_a"][c].get<double>();
            g.wind_b[c] = j["wind_b"][c].get<double>();
        }
        return g;
    }
};

// Build generators from initial position/velocity closures on a raw
// parameter interval [0, raw_period).  Requires the orthogonality gauge
// v . x' = 0; the parameter is renormalized so that |x'|^2 + |v|^2 = 1,
// which makes both generators unit speed.
inline DalembertGenerators build_generators(
    int N, const std::function<Vec(double)>& position0, const std::function<Vec(double)>& velocity0,
    const std::function<Vec(double)>& tangent0_raw, double raw_period, const Vec& winding,
    int samples = 4096) {
    DalembertGenerators g;
    g.N = N;

    // gauge check
    int probe = 257;
    for (int i = 0; i < probe; ++i) {
        double s = raw_period * i / probe;
        Vec xp = tangent0_raw(s), v = velocity0(s);
        require(std::abs(dot(xp, v)) <= 1e-8 * (norm(xp) + 1.0) * (norm(v) + 1.0) + 1e-12,
                "build_generators: initial data violates the orthogonality gauge v . x' = 0");
        require(dot(v, v) < 1.0 - 1e-9, "build_generators: superluminal initial velocity");
    }

    // cumulative renormalized parameter: dsigma/du = |x'(u)| / sqrt(1 - |v|^2)
    int fine = samples * 4;
    std::vector<double> cum(fine + 1, 0.0);
    auto rate = [&](double u) {
        Vec xp = tangent0_raw(u), v = velocity0(u);
        return norm(xp) / std::sqrt(1.0 - dot(v, v));
    };
    double du = raw_period / fine;
    for (int i = 0; i < fine; ++i) {
        double u0 = i * du, u1 = (i + 1) * du;
        cum[i + 1] = cum[i] + du / 6 * (rate(u0) + 4 * rate(0.5 * (u0 + u1)) + rate(u1));
    }
    g.period = cum[fine];

    // invert the monotone table at uniform sigma targets; Hermite seed plus
    // two Newton corrections (cum' = rate)
    auto cum_at = [&](double u) {
        double s = std::clamp(u / du, 0.0, static_cast<double>(fine));
        int i = std::min(static_cast<int>(s), fine - 1);
        return hermite(u, du * i, du * (i + 1), cum[i], cum[i + 1], rate(du * i),
                       rate(du * (i + 1)));
    };
    std::vector<double> u_of_sigma(samples);
    {
        int lo = 0;
        for (int j = 0; j < samples; ++j) {
            double target = g.period * j / samples;
            while (lo + 1 <= fine && cum[lo + 1] < target) ++lo;
            double t = (target - cum[lo]) / std::max(1e-300, cum[lo + 1] - cum[lo]);
            double u = du * (lo + t);
            for (int pass = 0; pass < 2; ++pass) u -= (cum_at(u) - target) / rate(u);
            u_of_sigma[j] = u;
        }
    }

    g.a.resize(samples);
    g.b.resize(samples);
    g.da.resize(samples);
    g.db.resize(samples);
    Vec W(N);  // running integral of the velocity in the new parameter
    double res = 0;
    Vec prev_v(N);
    double dsig = g.period / samples;
    for (int j = 0; j < samples; ++j) {
        double u = u_of_sigma[j];
        Vec x = position0(u), v = velocity0(u);
        Vec xp = (1.0 / rate(u)) * tangent0_raw(u);  // dx/dsigma
        if (j > 0) W += 0.5 * dsig * (prev_v + v);   // trapezoid
        prev_v = v;
        g.a[j] = x + W;
        g.b[j] = x - W;
        g.da[j] = xp + v;
        g.db[j] = xp - v;
        res = std::max(res, std::abs(norm(g.da[j]) - 1.0));
        res = std::max(res, std::abs(norm(g.db[j]) - 1.0));
        require(norm(g.da[j]) > 0.1 && norm(g.db[j]) > 0.1,
                "build_generators: null generator (non-timelike data)");
    }
    Vec Wfull = W + 0.5 * dsig * (prev_v + velocity0(u_of_sigma[0]));
    g.wind_a = winding + Wfull;
    g.wind_b = winding - Wfull;
    g.unit_speed_residual = res;
    require(res <= 1e-6, "build_generators: unit-speed residual " + std::to_string(res));
    return g;
}

class DalembertSurface final : public SurfaceBackend {
   public:
    explicit DalembertSurface(DalembertGenerators gen) : gen_(std::move(gen)) {}
    int space_dim() const override { return gen_.N; }
    SurfaceJet eval(double y0, double y1) const override {
        double sigma = gen_.sigma0 + gen_.period * y1;
        SurfaceJet j;
        j.h = gen_.position(sigma, y0);
        j.ht = gen_.velocity(sigma, y0);
        j.hs = gen_.period * gen_.tangent(sigma, y0);
        return j;
    }
    const DalembertGenerators& generators() const { return gen_; }

   private:
    DalembertGenerators gen_;
};

// ---------------------------------------------------------------------------
// SurfaceParametrization: a backend plus sampling metadata and cached gauge
// and non-degeneracy diagnostics over the sampled range.
// ---------------------------------------------------------------------------

struct SurfaceParametrization {
    std::shared_ptr<const SurfaceBackend> backend;
    int N = 2;
    int m = 256;  // y1 samples
    double t_lo = 0, t_hi = 0;
    int t_samples = 33;

    // cached diagnostics (filled by analyze())
    double gauge_residual = 0;
    double timelike_alpha = 0;   // min over samples of 1 - |h_t|^2
    double spacelike_alpha = 0;  // min over samples of |h_s|^2

    SurfaceJet jet(double y0, double y1) const { return backend->eval(y0, y1); }

    // 4-vectors H_{y^a} and H
    Vec H(double y0, double y1) const {
        SurfaceJet j = jet(y0, y1);
        Vec out(N + 1);
        out[0] = y0;
        for (int c = 0; c < N; ++c) out[c + 1] = j.h[c];
        return out;
    }

    void analyze() {
        double gr = 0, ta = std::numeric_limits<double>::infinity(),
               sa = std::numeric_limits<double>::infinity();
        for (int it = 0; it < t_samples; ++it) {
            double t = t_samples == 1 ? t_lo : t_lo + (t_hi - t_lo) * it / (t_samples - 1);
            for (int i = 0; i < m; ++i) {
                SurfaceJet j = jet(t, static_cast<double>(i) / m);
                gr = std::max(gr, std::abs(dot(j.ht, j.hs)));
                ta = std::min(ta, 1.0 - dot(j.ht, j.ht));
                sa = std::min(sa, dot(j.hs, j.hs));
            }
        }
        gauge_residual = gr;
        timelike_alpha = ta;
        spacelike_alpha = sa;
        require(ta > 0, "SurfaceParametrization: not timelike on the sampled range");
        require(sa > 0, "SurfaceParametrization: degenerate spatial direction");
    }
};

inline SurfaceParametrization make_surface(std::shared_ptr<const SurfaceBackend> be, double t_lo,
                                           double t_hi, int m = 256, int t_samples = 33) {
    SurfaceParametrization p;
    p.backend = std::move(be);
    p.N = p.backend->space_dim();
    p.m = m;
    p.t_lo = t_lo;
    p.t_hi = t_hi;
    p.t_samples = t_samples;
    p.analyze();
    return p;
}

// Exact evolution of a string from its generators; detects cusps
// (|x_sigma| -> 0) before the requested time.
inline SurfaceParametrization evolve_string(const DalembertGenerators& gen, double t, int m = 256) {
    // cusp scan on [min(0,t), max(0,t)]
    double lo = std::min(0.0, t), hi = std::max(0.0, t);
    int nt = 64;
    double first_cusp = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= nt; ++it) {
        double tt = lo + (hi - lo) * it / nt;
        for (int i = 0; i < m; ++i) {
            double sigma = gen.sigma0 + gen.period * i / m;
            if (norm(gen.tangent(sigma, tt)) < 1e-3) {
                first_cusp = std::min(first_cusp, std::abs(tt));
            }
        }
    }
    if (std::isfinite(first_cusp))
        throw GlwError("evolve_string: cusp detected near |t| = " + std::to_string(first_cusp));
    auto be = std::make_shared<DalembertSurface>(gen);
    return make_surface(be, t, t, m, 1);
}

inline SurfaceParametrization surface_from_generators(const DalembertGenerators& gen, double t_lo,
                                                      double t_hi, int m = 256) {
    auto be = std::make_shared<DalembertSurface>(gen);
    return make_surface(be, t_lo, t_hi, m);
}

// ---------------------------------------------------------------------------
// Gauge orthogonalization: solve dPsi/dy0 = -(h_t . h_s)/|h_s|^2 (y0, Psi),
// Psi(t_mid, y1) = y1, with classical RK4 at 4x the surface resolution, and
// wrap the base backend in the reparametrized one.
// ---------------------------------------------------------------------------

class ReparamSurface final : public SurfaceBackend {
   public:
    ReparamSurface(std::shared_ptr<const SurfaceBackend> base, double t_lo, double t_hi,
                   int m_base, int oversample = 4)
        : base_(std::move(base)), t_lo_(t_lo), t_hi_(t_hi) {
        my_ = m_base * oversample;
        // fixed step at 4x resolution in the timelike direction as well
        double span = std::max(t_hi_ - t_lo_, 1e-12);
        nt_ = std::max(2, static_cast<int>(std::ceil(span * my_)) + 1);
        dt_ = span / (nt_ - 1);
        psi_.assign(nt_, std::vector<double>(my_));
        dpsi_.assign(nt_, std::vector<double>(my_));

        std::vector<double> cur(my_);
        for (int i = 0; i < my_; ++i) cur[i] = static_cast<double>(i) / my_;
        // integrate forward from t_lo (initial slice is the identity there)
        for (int it = 0; it < nt_; ++it) {
            double t = t_lo_ + dt_ * it;
            for (int i = 0; i < my_; ++i) {
                psi_[it][i] = cur[i];
                dpsi_[it][i] = rhs(t, cur[i]);
            }
            if (it + 1 < nt_) {
                for (int i = 0; i < my_; ++i) {
                    double y = cur[i];
                    double k1 = rhs(t, y);
                    double k2 = rhs(t + 0.5 * dt_, y + 0.5 * dt_ * k1);
                    double k3 = rhs(t + 0.5 * dt_, y + 0.5 * dt_ * k2);
                    double k4 = rhs(t + dt_, y + dt_ * k3);
                    cur[i] = y + dt_ / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
                }
            }
        }
    }

    int space_dim() const override { return base_->space_dim(); }

    SurfaceJet eval(double y0, double y1) const override {
        double psi, psi_t, psi_s;
        lookup(y0, y1, psi, psi_t, psi_s);
        SurfaceJet j = base_->eval(y0, psi);
        SurfaceJet out;
        out.h = j.h;
        out.ht = j.ht + psi_t * j.hs;
        out.hs = psi_s * j.hs;
        return out;
    }

   private:
    double rhs(double t, double y1) const {
        SurfaceJet j = base_->eval(t, y1);
        return -dot(j.ht, j.hs) / dot(j.hs, j.hs);
    }
    // interpolated Psi and d Psi / d y0 at one point (periodic cubic in y1,
    // Hermite in t; the periodic part is Psi - y1)
    void eval_psi(double y0, double y1, double& psi, double& psi_t) const {
        double tt = std::clamp((y0 - t_lo_) / dt_, 0.0, static_cast<double>(nt_ - 1));
        int it = std::min(static_cast<int>(tt), nt_ - 2);
        double t0 = t_lo_ + dt_ * it, t1 = t0 + dt_;
        double frac = y1 - std::floor(y1);
        double s = frac * my_;
        int i = std::min(static_cast<int>(s), my_ - 1);
        double w[4];
        detail::cubic_weights(s - i, w);
        auto slice = [&](int row, double& val, double& dval) {
            double acc = 0, dacc = 0;
            for (int o = 0; o < 4; ++o) {
                int idx = i - 1 + o;
                int wrapped = ((idx % my_) + my_) % my_;
                double shift = std::floor(static_cast<double>(idx) / my_);
                acc += w[o] * (psi_[row][wrapped] + shift - static_cast<double>(idx) / my_);
                dacc += w[o] * dpsi_[row][wrapped];
            }
            val = acc + frac;
            dval = dacc;
        };
        double p0, p1, d0, d1;
        slice(it, p0, d0);
        slice(it + 1, p1, d1);
        psi = hermite(y0, t0, t1, p0, p1, d0, d1);
        psi_t = hermite_deriv(y0, t0, t1, p0, p1, d0, d1);
    }

    void lookup(double y0, double y1, double& psi, double& psi_t, double& psi_s) const {
        eval_psi(y0, y1, psi, psi_t);
        // differentiate the periodic part phi = Psi - y1 to stay continuous
        // across the wrap
        double dd = 0.5 / my_, pp, pm, unused;
        eval_psi(y0, y1 + dd, pp, unused);
        eval_psi(y0, y1 - dd, pm, unused);
        double phi_p = pp - (y1 + dd - std::floor(y1 + dd));
        double phi_m = pm - (y1 - dd - std::floor(y1 - dd));
        psi_s = 1.0 + (phi_p - phi_m) / (2 * dd);
    }

    std::shared_ptr<const SurfaceBackend> base_;
    double t_lo_, t_hi_, dt_;
    int my_, nt_;
    std::vector<std::vector<double>> psi_, dpsi_;
};

inline SurfaceParametrization orthogonalize_gauge(const SurfaceParametrization& raw) {
    // degenerate |h_s| would divide by zero in the reparametrization ODE
    for (int i = 0; i < raw.m; ++i) {
        SurfaceJet j = raw.jet(raw.t_lo, static_cast<double>(i) / raw.m);
        require(dot(j.hs, j.hs) > 1e-12,
                "orthogonalize_gauge: degenerate parametrization at y1 = " +
                    std::to_string(static_cast<double>(i) / raw.m));
    }
    auto be = std::make_shared<ReparamSurface>(raw.backend, raw.t_lo, raw.t_hi, raw.m);
    return make_surface(be, raw.t_lo, raw.t_hi, raw.m, raw.t_samples);
}

// ---------------------------------------------------------------------------
// Orthonormal frames for the normal bundle.
// ---------------------------------------------------------------------------

enum class FrameOrientation { PositiveLast, OutwardRadial };

class FrameField {
   public:
    virtual ~FrameField() = default;
    virtual int codim() const = 0;
    // nu_i(y0, y1), Minkowski-orthonormal, orthogonal to H_{y^a}
    virtual Vec normal(int i, double y0, double y1) const = 0;

    // tangential derivatives by Richardson-extrapolated central differences
    Vec d_normal(int i, int dir, double y0, double y1, double step = 4e-3) const {
        double h = step;
        auto at = [&](double d) {
            return dir == 0 ? normal(i, y0 + d, y1) : normal(i, y0, y1 + d);
        };
        Vec d1 = (1.0 / (2 * h)) * (at(h) - at(-h));
        Vec d2 = (1.0 / (4 * h)) * (at(2 * h) - at(-2 * h));
        return (1.0 / 3.0) * (4.0 * d1 - d2);  // 4th order
    }
};

namespace detail {
// Minkowski projector onto the tangent space of the surface at (y0,y1):
// P = H_{y^a} gamma^{ab} H_{y^b}^T eta.
inline Mat tangent_projector(const SurfaceParametrization& p, double y0, double y1) {
    SurfaceJet j = p.jet(y0, y1);
    int n1 = p.N + 1;
    Vec H0(n1), H1(n1);
    H0[0] = 1;
    H1[0] = 0;
    for (int c = 0; c < p.N; ++c) {
        H0[c + 1] = j.ht[c];
        H1[c + 1] = j.hs[c];
    }
    Mat gamma(2, 2);
    gamma(0, 0) = mdot(H0, H0);
    gamma(0, 1) = gamma(1, 0) = mdot(H0, H1);
    gamma(1, 1) = mdot(H1, H1);
    Mat ginv = inverse(gamma);
    Mat P(n1, n1);
    const Vec* Hs[2] = {&H0, &H1};
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int al = 0; al < n1; ++al)
                for (int be = 0; be < n1; ++be) {
                    double etasign = be == 0 ? -1.0 : 1.0;
                    P(al, be) += (*Hs[a])[al] * ginv(a, b) * (*Hs[b])[be] * etasign;
                }
    return P;
}
}  // namespace detail

// Codimension-1 frame from the Hodge-dual formula (N = 2 only); the sign is
// a global orientation choice.
class K1Frame final : public FrameField {
   public:
    K1Frame(const SurfaceParametrization& p, FrameOrientation orient) : p_(p) {
        // fix the global sign at (t_lo, 0)
        Vec nu = raw(p_.t_lo, 0.0);
        double pick = 0;
        if (orient == FrameOrientation::PositiveLast) pick = nu[p_.N];
        if (orient == FrameOrientation::OutwardRadial || std::abs(pick) < 1e-10) {
            SurfaceJet j = p_.jet(p_.t_lo, 0.0);
            Vec centroid(p_.N);
            for (int i = 0; i < p_.m; ++i) {
                centroid += (1.0 / p_.m) * p_.jet(p_.t_lo, static_cast<double>(i) / p_.m).h;
            }
            for (int c = 0; c < p_.N; ++c) pick += nu[c + 1] * (j.h[c] - centroid[c]);
        }
        sign_ = pick >= 0 ? 1.0 : -1.0;
    }
    int codim() const override { return 1; }
    Vec normal(int, double y0, double y1) const override { return sign_ * raw(y0, y1); }

   private:
    Vec raw(double y0, double y1) const {
        SurfaceJet j = p_.jet(y0, y1);
        // w_beta = eps_{beta gamma delta} H^gamma_{y0} H^delta_{y1}; nu = eta^{-1} w
        double w0 = j.ht[0] * j.hs[1] - j.ht[1] * j.hs[0];
        double w1 = -j.hs[1];
        double w2 = j.hs[0];
        Vec nu{-w0, w1, w2};
        double n2 = mdot(nu, nu);
        require(n2 > 0, "K1Frame: degenerate normal (surface not timelike?)");
        return (1.0 / std::sqrt(n2)) * nu;
    }
    SurfaceParametrization p_;
    double sign_ = 1.0;
};

// Codimension-2 frame (N = 3): the rotational freedom is fixed by choosing
// nu_1 to maximize its last coordinate at (y0, 0) and continuing along y1
// (and in y0) by projecting the previous frame and re-orthonormalizing.
class K2Frame final : public FrameField {
   public:
    explicit K2Frame(const SurfaceParametrization& p, double holonomy_tol = 1e-6) : p_(p) {
        my_ = 4 * p.m;
        nt_ = std::max(2, p.t_samples * 4);
        nu_[0].assign(static_cast<std::size_t>(nt_) * my_, Vec());
        nu_[1].assign(static_cast<std::size_t>(nt_) * my_, Vec());
        int n1 = p.N + 1;
        Vec prev_row1(n1), prev_row2(n1);
        for (int it = 0; it < nt_; ++it) {
            double t = p.t_lo + (p.t_hi - p.t_lo) * (nt_ == 1 ? 0.0 : it / double(nt_ - 1));
            for (int i = 0; i < my_; ++i) {
                double y1 = static_cast<double>(i) / my_;
                Mat P = detail::tangent_projector(p, t, y1);
                Mat Q = Mat::identity(n1) - P;
                Vec n1v, n2v;
                if (i == 0 && it == 0) {
                    Vec eN(n1);
                    eN[p.N] = 1;  // maximize the last coordinate
                    n1v = Q * eN;
                } else if (i == 0) {
                    n1v = Q * prev_row1;  // continue in y0 along y1 = 0
                } else {
                    n1v = Q * nu_[0][idx(it, i - 1)];
                }
                double nn = mdot(n1v, n1v);
                require(nn > 1e-12, "K2Frame: frame continuation degenerated");
                n1v = (1.0 / std::sqrt(nn)) * n1v;

                // complete the basis inside the normal plane
                Vec cand(n1);
                bool have = false;
                if (i == 0 && it > 0) {
                    cand = prev_row2;
                    have = true;
                } else if (i > 0) {
                    cand = nu_[1][idx(it, i - 1)];
                    have = true;
                }
                if (!have) {
                    // any vector with a large normal component
                    for (int c = n1 - 1; c >= 0 && !have; --c) {
                        Vec e(n1);
                        e[c] = 1;
                        Vec q = Q * e;
                        q -= mdot(q, n1v) * n1v;
                        if (mdot(q, q) > 1e-8) {
                            cand = q;
                            have = true;
                        }
                    }
                }
                Vec q = Q * cand;
                q -= mdot(q, n1v) * n1v;
                double qq = mdot(q, q);
                require(qq > 1e-12, "K2Frame: could not complete the normal frame");
                n2v = (1.0 / std::sqrt(qq)) * q;
                nu_[0][idx(it, i)] = n1v;
                nu_[1][idx(it, i)] = n2v;
                if (i == 0) {
                    prev_row1 = n1v;
                    prev_row2 = n2v;
                }
            }
            // periodic closure
            Mat P = detail::tangent_projector(p, t, 0.0);
            Mat Q = Mat::identity(n1) - P;
            Vec back = Q * nu_[0][idx(it, my_ - 1)];
            back = (1.0 / std::sqrt(mdot(back, back))) * back;
            Vec gap = back - nu_[0][idx(it, 0)];
            double closure = norm(gap);
            holonomy_gap_ = std::max(holonomy_gap_, closure);
            require(closure <= holonomy_tol,
                    "K2Frame: frame fails to close around the torus (holonomy gap " +
                        std::to_string(closure) + ")");
        }
    }
    int codim() const override { return 2; }
    Vec normal(int i, double y0, double y1) const override {
        // bicubic interpolation of the sampled frame, then re-orthonormalize
        int n1 = p_.N + 1;
        double span = std::max(p_.t_hi - p_.t_lo, 1e-300);
        double tt = std::clamp((y0 - p_.t_lo) / span * (nt_ - 1), 0.0, double(nt_ - 1));
        int it = std::clamp(static_cast<int>(tt), 1, std::max(1, nt_ - 3));
        double ft = tt - it;
        double frac = y1 - std::floor(y1);
        double s = frac * my_;
        int is = std::min(static_cast<int>(s), my_ - 1);
        double ws[4], wt[4];
        detail::cubic_weights(s - is, ws);
        detail::cubic_weights(ft, wt);
        Vec acc0(n1), acc1(n1);
        for (int ot = 0; ot < 4; ++ot) {
            int row = std::clamp(it - 1 + ot, 0, nt_ - 1);
            for (int os = 0; os < 4; ++os) {
                int col = ((is - 1 + os) % my_ + my_) % my_;
                double w = wt[ot] * ws[os];
                acc0 += w * nu_[0][idx(row, col)];
                acc1 += w * nu_[1][idx(row, col)];
            }
        }
        Mat P = detail::tangent_projector(p_, y0, y1);
        Mat Q = Mat::identity(n1) - P;
        Vec v0 = Q * acc0;
        v0 = (1.0 / std::sqrt(mdot(v0, v0))) * v0;
        if (i == 0) return v0;
        Vec v1 = Q * acc1;
        v1 -= mdot(v1, v0) * v0;
        return (1.0 / std::sqrt(mdot(v1, v1))) * v1;
    }
    double holonomy_gap() const { return holonomy_gap_; }

   private:
    std::size_t idx(int it, int i) const { return static_cast<std::size_t>(it) * my_ + i; }
    SurfaceParametrization p_;
    int my_, nt_;
    double holonomy_gap_ = 0;
    std::array<std::vector<Vec>, 2> nu_;
};

inline std::shared_ptr<FrameField> normal_frame(
    const SurfaceParametrization& p, int k,
    FrameOrientation orient = FrameOrientation::PositiveLast) {
    require(k == 1 || k == 2, "normal_frame: k must be 1 or 2");
    require(p.N == 1 + k, "normal_frame: need N = n + k with n = 1");
    if (k == 1) return std::make_shared<K1Frame>(p, orient);
    return std::make_shared<K2Frame>(p);
}

// max over samples of the frame-invariant residuals
struct FrameCheck {
    double orthonormality = 0;  // |nu_i^T eta nu_j - delta_ij|
    double tangency = 0;        // |H_{y^a}^T eta nu_i|
};

inline FrameCheck check_frame(const SurfaceParametrization& p, const FrameField& f,
                              int t_samples = 9, int s_samples = 64) {
    FrameCheck r;
    for (int it = 0; it < t_samples; ++it) {
        double t = p.t_lo + (p.t_hi - p.t_lo) * (t_samples == 1 ? 0.0 : it / double(t_samples - 1));
        for (int i = 0; i < s_samples; ++i) {
            double y1 = static_cast<double>(i) / s_samples;
            SurfaceJet j = p.jet(t, y1);
            int n1 = p.N + 1;
            Vec H0(n1), H1(n1);
            H0[0] = 1;
            for (int c = 0; c < p.N; ++c) {
                H0[c + 1] = j.ht[c];
                H1[c + 1] = j.hs[c];
            }
            for (int a = 0; a < f.codim(); ++a) {
                Vec nu = f.normal(a, t, y1);
                r.tangency = std::max(r.tangency, std::abs(mdot(H0, nu)));
                r.tangency = std::max(r.tangency, std::abs(mdot(H1, nu)));
                for (int b = 0; b < f.codim(); ++b) {
                    Vec nub = f.normal(b, t, y1);
                    double target = a == b ? 1.0 : 0.0;
                    r.orthonormality =
                        std::max(r.orthonormality, std::abs(mdot(nu, nub) - target));
                }
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Surface energy-momentum tensor: area density sqrt(-gamma), Minkowski
// projection P, normal velocity V, and quadrature pairing against test
// tensor fields.
// ---------------------------------------------------------------------------

struct SurfaceEMT {
    SurfaceParametrization param;
    int mt = 65;  // time quadrature samples over [t_lo, t_hi]

    struct Sample {
        Vec x;            // (t, position)
        double area;      // sqrt(-gamma)
        double V;         // euclidean normal velocity |h_t| (orthogonal gauge)
        Mat P;            // projection onto the tangent space
    };

    Sample at(double t, double y1) const {
        SurfaceJet j = param.jet(t, y1);
        Sample s;
        int n1 = param.N + 1;
        s.x = Vec(n1);
        s.x[0] = t;
        for (int c = 0; c < param.N; ++c) s.x[c + 1] = j.h[c];
        double g00 = -1 + dot(j.ht, j.ht);
        double g01 = dot(j.ht, j.hs);
        double g11 = dot(j.hs, j.hs);
        double gamma = g00 * g11 - g01 * g01;
        require(gamma < 0, "surface_tensor: non-timelike sample");
        s.area = std::sqrt(-gamma);
        s.V = std::sqrt(std::max(0.0, dot(j.ht, j.ht)));
        s.P = detail::tangent_projector(param, t, y1);
        return s;
    }

    // <m, T(Gamma)> = int m(alpha,beta) P^alpha_beta sqrt(-gamma) dy0 dy1
    double pair(const std::function<Mat(const Vec&)>& m) const {
        int n1 = param.N + 1;
        std::vector<double> slices(mt);
        for (int it = 0; it < mt; ++it) {
            double t = param.t_lo + (param.t_hi - param.t_lo) *
                                        (mt == 1 ? 0.0 : it / double(mt - 1));
            std::vector<double> ring(param.m);
            for (int i = 0; i < param.m; ++i) {
                Sample s = at(t, static_cast<double>(i) / param.m);
                Mat mm = m(s.x);
                double acc = 0;
                for (int al = 0; al < n1; ++al)
                    for (int be = 0; be < n1; ++be) acc += mm(al, be) * s.P(al, be);
                ring[i] = acc * s.area / param.m;
            }
            double w = (it == 0 || it == mt - 1) ? 0.5 : 1.0;  // trapezoid
            slices[it] = w * tree_sum(ring);
        }
        double dt = mt == 1 ? 1.0 : (param.t_hi - param.t_lo) / (mt - 1);
        return tree_sum(slices) * dt;
    }
};

inline SurfaceEMT surface_tensor(const SurfaceParametrization& p, double gauge_tol = 1e-6) {
    require(p.gauge_residual <= gauge_tol,
            "surface_tensor: gauge residual too large; orthogonalize first");
    SurfaceEMT emt;
    emt.param = p;
    return emt;
}

// Normal velocity field V = |h_{y0}| in the orthogonal gauge.
inline double normal_velocity(const SurfaceParametrization& p, double t, double y1) {
    SurfaceJet j = p.jet(t, y1);
    double V2 = dot(j.ht, j.ht);
    require(V2 < 1.0, "normal_velocity: V >= 1 (not timelike)");
    return std::sqrt(V2);
}

// Minkowski area of the sampled patch (quadrature of sqrt(-gamma)).
inline double minkowski_area(const SurfaceParametrization& p, int mt = 129) {
    std::vector<double> slices(mt);
    for (int it = 0; it < mt; ++it) {
        double t = p.t_lo + (p.t_hi - p.t_lo) * (mt == 1 ? 0.0 : it / double(mt - 1));
        std::vector<double> ring(p.m);
        for (int i = 0; i < p.m; ++i) {
            SurfaceJet j = p.jet(t, static_cast<double>(i) / p.m);
            double g00 = -1 + dot(j.ht, j.ht);
            double g01 = dot(j.ht, j.hs);
            double g11 = dot(j.hs, j.hs);
            ring[i] = std::sqrt(-(g00 * g11 - g01 * g01)) / p.m;
        }
        double w = (it == 0 || it == mt - 1) ? 0.5 : 1.0;
        slices[it] = w * tree_sum(ring);
    }
    double dt = mt == 1 ? 1.0 : (p.t_hi - p.t_lo) / (mt - 1);
    return tree_sum(slices) * dt;
}

// Residual of the discretized minimal-surface equation
// d_a ( sqrt(-gamma) gamma^{ab} H_{y^b} ) = 0, by centered differences.
inline double minimal_surface_residual(const SurfaceParametrization& p, double t, int samples = 64,
                                       double step = 1e-3) {
    auto flux = [&](double y0, double y1, int a) {
        SurfaceJet j = p.jet(y0, y1);
        int n1 = p.N + 1;
        Vec H0(n1), H1(n1);
        H0[0] = 1;
        for (int c = 0; c < p.N; ++c) {
            H0[c + 1] = j.ht[c];
            H1[c + 1] = j.hs[c];
        }
        Mat gamma(2, 2);
        gamma(0, 0) = mdot(H0, H0);
        gamma(0, 1) = gamma(1, 0) = mdot(H0, H1);
        gamma(1, 1) = mdot(H1, H1);
        double det2 = gamma(0, 0) * gamma(1, 1) - gamma(0, 1) * gamma(1, 0);
        Mat ginv = inverse(gamma);
        double sq = std::sqrt(-det2);
        Vec out(n1);
        for (int b = 0; b < 2; ++b) {
            const Vec& Hb = b == 0 ? H0 : H1;
            out += (sq * ginv(a, b)) * Hb;
        }
        return out;
    };
    double worst = 0;
    for (int i = 0; i < samples; ++i) {
        double y1 = static_cast<double>(i) / samples;
        Vec r = (1.0 / (2 * step)) * (flux(t + step, y1, 0) - flux(t - step, y1, 0)) +
                (1.0 / (2 * step)) * (flux(t, y1 + step, 1) - flux(t, y1 - step, 1));
        worst = std::max(worst, norm(r));
    }
    return worst;
}

// Minkowski area functional of a perturbed parametrization, for
// first-variation checks against the surface tensor.
inline double perturbed_area(const SurfaceParametrization& p,
                             const std::function<Vec(const Vec&)>& tau, double sigma,
                             int mt = 129) {
    std::vector<double> slices(mt);
    int n1 = p.N + 1;
    double span = p.t_hi - p.t_lo;
    double dstep = 1e-5;
    auto Hs = [&](double t, double y1) {
        SurfaceJet j = p.jet(t, y1);
        Vec H(n1);
        H[0] = t;
        for (int c = 0; c < p.N; ++c) H[c + 1] = j.h[c];
        return H + sigma * tau(H);
    };
    for (int it = 0; it < mt; ++it) {
        double t = p.t_lo + span * (mt == 1 ? 0.0 : it / double(mt - 1));
        std::vector<double> ring(p.m);
        for (int i = 0; i < p.m; ++i) {
            double y1 = static_cast<double>(i) / p.m;
            Vec d0 = (1.0 / (2 * dstep)) * (Hs(t + dstep, y1) - Hs(t - dstep, y1));
            Vec d1 = (1.0 / (2 * dstep)) * (Hs(t, y1 + dstep) - Hs(t, y1 - dstep));
            double g00 = mdot(d0, d0), g01 = mdot(d0, d1), g11 = mdot(d1, d1);
            ring[i] = std::sqrt(std::max(0.0, -(g00 * g11 - g01 * g01))) / p.m;
        }
        double w = (it == 0 || it == mt - 1) ? 0.5 : 1.0;
        slices[it] = w * tree_sum(ring);
    }
    double dt = mt == 1 ? 1.0 : span / (mt - 1);
    return tree_sum(slices) * dt;
}

}  // namespace glwave
