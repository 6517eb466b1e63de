#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glwave {

inline constexpr double PI = 3.141592653589793238462643383279502884;

struct GlwError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw GlwError(msg);
}

// ---------------------------------------------------------------------------
// Small dense vectors/matrices, capacity 4 (enough for 1+N with N <= 3).
// ---------------------------------------------------------------------------

struct Vec {
    std::array<double, 4> a{0, 0, 0, 0};
    int n = 0;

    Vec() = default;
    explicit Vec(int dim) : n(dim) {}
    Vec(std::initializer_list<double> xs) {
        n = static_cast<int>(xs.size());
        int i = 0;
        for (double x : xs) a[i++] = x;
    }
    double& operator[](int i) { return a[i]; }
    double operator[](int i) const { return a[i]; }

    Vec& operator+=(const Vec& o) { for (int i = 0; i < n; ++i) a[i] += o.a[i]; return *this; }
    Vec& operator-=(const Vec& o) { for (int i = 0; i < n; ++i) a[i] -= o.a[i]; return *this; }
    Vec& operator*=(double s) { for (int i = 0; i < n; ++i) a[i] *= s; return *this; }
    friend Vec operator+(Vec x, const Vec& y) { return x += y; }
    friend Vec operator-(Vec x, const Vec& y) { return x -= y; }
    friend Vec operator*(double s, Vec x) { return x *= s; }
    friend Vec operator*(Vec x, double s) { return x *= s; }
};

inline double dot(const Vec& x, const Vec& y) {
    double s = 0;
    for (int i = 0; i < x.n; ++i) s += x.a[i] * y.a[i];
    return s;
}

// Minkowski inner product with eta = diag(-1, 1, ..., 1).
inline double mdot(const Vec& x, const Vec& y) {
    double s = -x.a[0] * y.a[0];
    for (int i = 1; i < x.n; ++i) s += x.a[i] * y.a[i];
    return s;
}

inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }

struct Mat {
    std::array<double, 16> a{};
    int r = 0, c = 0;

    Mat() = default;
    Mat(int rows, int cols) : r(rows), c(cols) { a.fill(0.0); }
    double& operator()(int i, int j) { return a[i * 4 + j]; }
    double operator()(int i, int j) const { return a[i * 4 + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }
    Mat transposed() const {
        Mat m(c, r);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(j, i) = (*this)(i, j);
        return m;
    }
    Vec col(int j) const {
        Vec v(r);
        for (int i = 0; i < r; ++i) v[i] = (*this)(i, j);
        return v;
    }
    Vec row(int i) const {
        Vec v(c);
        for (int j = 0; j < c; ++j) v[j] = (*this)(i, j);
        return v;
    }
    void set_col(int j, const Vec& v) {
        for (int i = 0; i < r; ++i) (*this)(i, j) = v[i];
    }
};

inline Mat operator*(const Mat& x, const Mat& y) {
    Mat m(x.r, y.c);
    for (int i = 0; i < x.r; ++i)
        for (int k = 0; k < x.c; ++k) {
            double v = x(i, k);
            if (v == 0) continue;
            for (int j = 0; j < y.c; ++j) m(i, j) += v * y(k, j);
        }
    return m;
}

inline Vec operator*(const Mat& m, const Vec& v) {
    Vec w(m.r);
    for (int i = 0; i < m.r; ++i) {
        double s = 0;
        for (int j = 0; j < m.c; ++j) s += m(i, j) * v[j];
        w[i] = s;
    }
    return w;
}

inline Mat operator-(const Mat& x, const Mat& y) {
    Mat m(x.r, x.c);
    for (int i = 0; i < x.r; ++i)
        for (int j = 0; j < x.c; ++j) m(i, j) = x(i, j) - y(i, j);
    return m;
}

inline Mat operator+(const Mat& x, const Mat& y) {
    Mat m(x.r, x.c);
    for (int i = 0; i < x.r; ++i)
        for (int j = 0; j < x.c; ++j) m(i, j) = x(i, j) + y(i, j);
    return m;
}

inline Mat operator*(double s, const Mat& x) {
    Mat m = x;
    for (int i = 0; i < m.r; ++i)
        for (int j = 0; j < m.c; ++j) m(i, j) *= s;
    return m;
}

inline double max_abs(const Mat& m) {
    double v = 0;
    for (int i = 0; i < m.r; ++i)
        for (int j = 0; j < m.c; ++j) v = std::max(v, std::abs(m(i, j)));
    return v;
}

// eta as a matrix, diag(-1, 1, ..., 1)
inline Mat minkowski_eta(int n) {
    Mat m = Mat::identity(n);
    m(0, 0) = -1;
    return m;
}

// Gaussian elimination with partial pivoting.  Throws on (numerically)
// singular input.
inline Vec solve(Mat m, Vec b) {
    int n = m.r;
    for (int p = 0; p < n; ++p) {
        int piv = p;
        for (int i = p + 1; i < n; ++i)
            if (std::abs(m(i, p)) > std::abs(m(piv, p))) piv = i;
        if (std::abs(m(piv, p)) < 1e-300) throw GlwError("solve: singular matrix");
        if (piv != p) {
            for (int j = 0; j < n; ++j) std::swap(m(p, j), m(piv, j));
            std::swap(b[p], b[piv]);
        }
        for (int i = p + 1; i < n; ++i) {
            double f = m(i, p) / m(p, p);
            if (f == 0) continue;
            for (int j = p; j < n; ++j) m(i, j) -= f * m(p, j);
            b[i] -= f * b[p];
        }
    }
    Vec x(n);
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= m(i, j) * x[j];
        x[i] = s / m(i, i);
    }
    return x;
}

inline Mat inverse(const Mat& m) {
    int n = m.r;
    Mat inv(n, n);
    for (int j = 0; j < n; ++j) {
        Vec e(n);
        e[j] = 1;
        Vec x = solve(m, e);
        inv.set_col(j, x);
    }
    return inv;
}

inline double det(Mat m) {
    int n = m.r;
    double d = 1;
    for (int p = 0; p < n; ++p) {
        int piv = p;
        for (int i = p + 1; i < n; ++i)
            if (std::abs(m(i, p)) > std::abs(m(piv, p))) piv = i;
        if (std::abs(m(piv, p)) == 0) return 0;
        if (piv != p) {
            for (int j = 0; j < n; ++j) std::swap(m(p, j), m(piv, j));
            d = -d;
        }
        d *= m(p, p);
        for (int i = p + 1; i < n; ++i) {
            double f = m(i, p) / m(p, p);
            for (int j = p; j < n; ++j) m(i, j) -= f * m(p, j);
        }
    }
    return d;
}

// Eigenvalues/vectors of a symmetric matrix (cyclic Jacobi).
struct EigenSym {
    Vec values;
    Mat vectors;  // columns
};

inline EigenSym eigen_sym(Mat m) {
    int n = m.r;
    Mat v = Mat::identity(n);
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
        if (off < 1e-28) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(m(p, q)) < 1e-300) continue;
                double theta = (m(q, q) - m(p, p)) / (2 * m(p, q));
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1));
                double cth = 1 / std::sqrt(t * t + 1), sth = t * cth;
                for (int i = 0; i < n; ++i) {
                    double mip = m(i, p), miq = m(i, q);
                    m(i, p) = cth * mip - sth * miq;
                    m(i, q) = sth * mip + cth * miq;
                }
                for (int j = 0; j < n; ++j) {
                    double mpj = m(p, j), mqj = m(q, j);
                    m(p, j) = cth * mpj - sth * mqj;
                    m(q, j) = sth * mpj + cth * mqj;
                }
                for (int i = 0; i < n; ++i) {
                    double vip = v(i, p), viq = v(i, q);
                    v(i, p) = cth * vip - sth * viq;
                    v(i, q) = sth * vip + cth * viq;
                }
            }
    }
    EigenSym e;
    e.values = Vec(n);
    for (int i = 0; i < n; ++i) e.values[i] = m(i, i);
    e.vectors = v;
    return e;
}

// Principal square root of a symmetric positive definite matrix.
inline Mat sqrt_spd(const Mat& m) {
    EigenSym e = eigen_sym(m);
    int n = m.r;
    Mat s(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double v = 0;
            for (int k = 0; k < n; ++k)
                v += e.vectors(i, k) * std::sqrt(std::max(0.0, e.values[k])) * e.vectors(j, k);
            s(i, j) = v;
        }
    return s;
}

// ---------------------------------------------------------------------------
// Deterministic reductions: fixed-shape pairwise tree, independent of the
// thread decomposition that produced the addends.
// ---------------------------------------------------------------------------

inline double tree_sum(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    std::vector<double> level(xs.begin(), xs.end());
    while (level.size() > 1) {
        std::size_t half = (level.size() + 1) / 2;
        std::vector<double> next(half);
        for (std::size_t i = 0; i < half; ++i) {
            double a = level[2 * i];
            double b = (2 * i + 1 < level.size()) ? level[2 * i + 1] : 0.0;
            next[i] = a + b;
        }
        level.swap(next);
    }
    return level[0];
}

// ---------------------------------------------------------------------------
// Reproducible RNG (splitmix64).
// ---------------------------------------------------------------------------

struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed = 0x9e3779b97f4a7c15ull) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

inline std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
    return fnv1a64(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Quadrature and interpolation.
// ---------------------------------------------------------------------------

struct QuadResult {
    double value;
    double error_estimate;
};

namespace detail {
inline double adapt_simpson(const std::function<double(double)>& f, double a, double b,
                            double fa, double fm, double fb, double whole, double tol,
                            int depth, double& err_acc) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6 * (fa + 4 * flm + fm);
    double right = (b - m) / 6 * (fm + 4 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15 * tol) {
        err_acc += std::abs(delta) / 15;
        return left + right + delta / 15;
    }
    return adapt_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, err_acc) +
           adapt_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, err_acc);
}
}  // namespace detail

inline QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                            double tol = 1e-12, int max_depth = 48) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    double err = 0;
    double v = detail::adapt_simpson(f, a, b, fa, fm, fb, whole, tol, max_depth, err);
    return {v, err};
}

namespace detail {
// weights of 4-point cubic Lagrange interpolation; nodes at -1,0,1,2, t in [0,1)
inline void cubic_weights(double t, double w[4]) {
    w[0] = -t * (t - 1) * (t - 2) / 6.0;
    w[1] = (t + 1) * (t - 1) * (t - 2) / 2.0;
    w[2] = -(t + 1) * t * (t - 2) / 2.0;
    w[3] = (t + 1) * t * (t - 1) / 6.0;
}
}  // namespace detail

// Cubic Hermite on [x0, x1] from endpoint values and derivatives.
inline double hermite(double x, double x0, double x1, double f0, double f1, double d0,
                      double d1) {
    double h = x1 - x0, t = (x - x0) / h;
    double t2 = t * t, t3 = t2 * t;
    return f0 * (2 * t3 - 3 * t2 + 1) + f1 * (-2 * t3 + 3 * t2) +
           h * (d0 * (t3 - 2 * t2 + t) + d1 * (t3 - t2));
}

inline double hermite_deriv(double x, double x0, double x1, double f0, double f1, double d0,
                            double d1) {
    double h = x1 - x0, t = (x - x0) / h;
    double t2 = t * t;
    return (f0 * (6 * t2 - 6 * t) + f1 * (-6 * t2 + 6 * t)) / h +
           d0 * (3 * t2 - 4 * t + 1) + d1 * (3 * t2 - 2 * t);
}

// ---------------------------------------------------------------------------
// Complete elliptic integral K(m) and Jacobi sn via AGM / descending Landen.
// Parameter convention: m = k^2.
// ---------------------------------------------------------------------------

inline double ellint_K(double m) {
    require(m >= 0 && m < 1, "ellint_K: need m in [0,1)");
    double a = 1.0, b = std::sqrt(1.0 - m);
    for (int it = 0; it < 40 && std::abs(a - b) > 4e-16 * a; ++it) {
        double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return PI / (2 * a);
}

struct JacobiSnCnDn {
    double sn, cn, dn;
};

inline JacobiSnCnDn jacobi_elliptic(double u, double m) {
    if (m < 1e-14) return {std::sin(u), std::cos(u), 1.0};
    // AGM scale chain with descending Landen recovery of the amplitude
    std::array<double, 64> as, cs;
    double a = 1.0, b = std::sqrt(1.0 - m), c = std::sqrt(m);
    int nlev = 0;
    while (std::abs(c) > 1e-17 * a && nlev < 60) {
        as[nlev] = a;
        cs[nlev] = c;
        ++nlev;
        double an = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = std::sqrt(a * b);
        a = an;
    }
    as[nlev] = a;
    cs[nlev] = c;
    double phi = std::ldexp(a * u, nlev);
    for (int i = nlev; i > 0; --i)
        phi = 0.5 * (phi + std::asin(std::clamp(cs[i] / as[i] * std::sin(phi), -1.0, 1.0)));
    double sn = std::sin(phi), cn = std::cos(phi);
    double dn = std::sqrt(std::max(0.0, 1.0 - m * sn * sn));
    return {sn, cn, dn};
}

inline double jacobi_sn(double u, double m) { return jacobi_elliptic(u, m).sn; }

// ---------------------------------------------------------------------------
// Least-squares slope of log2(y) against log2(x).
// ---------------------------------------------------------------------------

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
};

inline SlopeFit loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = static_cast<int>(x.size());
    for (int i = 0; i < n; ++i) {
        require(x[i] > 0 && y[i] > 0, "loglog_slope: positive data required");
        double lx = std::log2(x[i]), ly = std::log2(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    double denom = n * sxx - sx * sx;
    SlopeFit f;
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    return f;
}

// Parallel loop over [0, n) in contiguous blocks.  Falls back to serial for
// small n.  The decomposition does not affect results; reductions go through
// per-item or per-row buffers combined with tree_sum.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  int threads);

}  // namespace glwave

#include <thread>

namespace glwave {

inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                         int threads = 0) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    if (n < 4096 || threads == 1) {
        body(0, n);
        return;
    }
    std::size_t nblocks = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(nblocks);
    std::size_t chunk = (n + nblocks - 1) / nblocks;
    for (std::size_t b = 0; b < nblocks; ++b) {
        std::size_t lo = b * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace glwave
