#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "glwave/math.hpp"
#include "json.hpp"

namespace glwave {

// Uniform periodic grid over an axis-aligned box, up to 3 spatial dimensions.
// Node i lives at lo + i*h; the face at hi identifies with the face at lo.
struct GridSpec {
    int nd = 0;
    std::array<int, 3> cells{1, 1, 1};
    std::array<double, 3> lo{0, 0, 0};
    std::array<double, 3> hi{1, 1, 1};

    double spacing(int d) const { return (hi[d] - lo[d]) / cells[d]; }
    double min_spacing() const {
        double h = spacing(0);
        for (int d = 1; d < nd; ++d) h = std::min(h, spacing(d));
        return h;
    }
    double max_spacing() const {
        double h = spacing(0);
        for (int d = 1; d < nd; ++d) h = std::max(h, spacing(d));
        return h;
    }
    std::size_t node_count() const {
        std::size_t n = 1;
        for (int d = 0; d < nd; ++d) n *= static_cast<std::size_t>(cells[d]);
        return n;
    }
    double cell_volume() const {
        double v = 1;
        for (int d = 0; d < nd; ++d) v *= spacing(d);
        return v;
    }
    int wrap(int i, int d) const {
        int n = cells[d];
        i %= n;
        return i < 0 ? i + n : i;
    }
    std::size_t index(int i, int j = 0, int k = 0) const {
        if (nd == 1) return static_cast<std::size_t>(wrap(i, 0));
        if (nd == 2)
            return static_cast<std::size_t>(wrap(i, 0)) * cells[1] + wrap(j, 1);
        return (static_cast<std::size_t>(wrap(i, 0)) * cells[1] + wrap(j, 1)) *
                   static_cast<std::size_t>(cells[2]) +
               wrap(k, 2);
    }
    void unindex(std::size_t idx, int out[3]) const {
        if (nd == 1) {
            out[0] = static_cast<int>(idx);
            out[1] = out[2] = 0;
            return;
        }
        if (nd == 2) {
            out[0] = static_cast<int>(idx / cells[1]);
            out[1] = static_cast<int>(idx % cells[1]);
            out[2] = 0;
            return;
        }
        out[2] = static_cast<int>(idx % cells[2]);
        std::size_t rest = idx / cells[2];
        out[1] = static_cast<int>(rest % cells[1]);
        out[0] = static_cast<int>(rest / cells[1]);
    }
    double coord(int i, int d) const { return lo[d] + spacing(d) * i; }
    // periodic distance along axis d
    double axis_dist(double a, double b, int d) const {
        double L = hi[d] - lo[d];
        double x = std::fmod(a - b, L);
        if (x < -0.5 * L) x += L;
        if (x > 0.5 * L) x -= L;
        return x;
    }
};

// Field values (u, u_t) on a periodic grid at one instant.
struct FieldState {
    GridSpec grid;
    int k = 1;         // number of target components
    double eps = 0.1;  // scaling parameter of the equation
    double time = 0;
    std::array<std::vector<double>, 2> u;
    std::array<std::vector<double>, 2> ut;

    FieldState() = default;
    FieldState(const GridSpec& g, int ncomp, double epsilon, double t = 0)
        : grid(g), k(ncomp), eps(epsilon), time(t) {
        require(k == 1 || k == 2, "FieldState: k must be 1 or 2");
        require(g.min_spacing() <= epsilon / 4 + 1e-12,
                "FieldState: grid spacing must resolve eps (h <= eps/4)");
        for (int c = 0; c < k; ++c) {
            u[c].assign(g.node_count(), 0.0);
            ut[c].assign(g.node_count(), 0.0);
        }
    }

    // centered gradient of component c at node (i,j,kk), one entry per dim
    void gradient(int c, int i, int j, int kk, double out[3], bool fourth_order = false) const {
        int id[3] = {i, j, kk};
        for (int d = 0; d < grid.nd; ++d) {
            int ip[3] = {id[0], id[1], id[2]}, im[3] = {id[0], id[1], id[2]};
            ip[d] += 1;
            im[d] -= 1;
            double h = grid.spacing(d);
            if (!fourth_order) {
                out[d] = (u[c][grid.index(ip[0], ip[1], ip[2])] -
                          u[c][grid.index(im[0], im[1], im[2])]) /
                         (2 * h);
            } else {
                int ip2[3] = {id[0], id[1], id[2]}, im2[3] = {id[0], id[1], id[2]};
                ip2[d] += 2;
                im2[d] -= 2;
                out[d] = (-u[c][grid.index(ip2[0], ip2[1], ip2[2])] +
                          8 * u[c][grid.index(ip[0], ip[1], ip[2])] -
                          8 * u[c][grid.index(im[0], im[1], im[2])] +
                          u[c][grid.index(im2[0], im2[1], im2[2])]) /
                         (12 * h);
            }
        }
    }

    bool finite() const {
        for (int c = 0; c < k; ++c) {
            for (double v : u[c])
                if (!std::isfinite(v)) return false;
            for (double v : ut[c])
                if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Periodic interpolation: 4-point cubic Lagrange per axis (tensor product).
// ---------------------------------------------------------------------------

// Interpolate a scalar lattice field at physical point x (cubic, periodic).
inline double interp_cubic(const GridSpec& g, const std::vector<double>& f, const double x[3]) {
    int base[3] = {0, 0, 0};
    double wts[3][4];
    for (int d = 0; d < g.nd; ++d) {
        double s = (x[d] - g.lo[d]) / g.spacing(d);
        double fl = std::floor(s);
        base[d] = static_cast<int>(fl);
        detail::cubic_weights(s - fl, wts[d]);
    }
    double acc = 0;
    int n1 = g.nd > 1 ? 4 : 1, n2 = g.nd > 2 ? 4 : 1;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < n1; ++b)
            for (int c = 0; c < n2; ++c) {
                double w = wts[0][a] * (g.nd > 1 ? wts[1][b] : 1.0) * (g.nd > 2 ? wts[2][c] : 1.0);
                acc += w * f[g.index(base[0] - 1 + a, base[1] - 1 + b, base[2] - 1 + c)];
            }
    return acc;
}

// ---------------------------------------------------------------------------
// Binary snapshot format: flat little-endian float64 per component
// (u[0..k), ut[0..k)), plus a JSON sidecar with the header.
// ---------------------------------------------------------------------------

inline void save_field(const FieldState& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "save_field: cannot open " + path);
    for (int c = 0; c < s.k; ++c)
        out.write(reinterpret_cast<const char*>(s.u[c].data()),
                  static_cast<std::streamsize>(s.u[c].size() * sizeof(double)));
    for (int c = 0; c < s.k; ++c)
        out.write(reinterpret_cast<const char*>(s.ut[c].data()),
                  static_cast<std::streamsize>(s.ut[c].size() * sizeof(double)));
    nlohmann::json hdr;
    hdr["dims"] = std::vector<int>(s.grid.cells.begin(), s.grid.cells.begin() + s.grid.nd);
    hdr["lo"] = std::vector<double>(s.grid.lo.begin(), s.grid.lo.begin() + s.grid.nd);
    hdr["hi"] = std::vector<double>(s.grid.hi.begin(), s.grid.hi.begin() + s.grid.nd);
    hdr["h"] = s.grid.min_spacing();
    hdr["eps"] = s.eps;
    hdr["k"] = s.k;
    hdr["t"] = s.time;
    std::ofstream side(path + ".json");
    side << hdr.dump(2) << "\n";
}

inline FieldState load_field(const std::string& path) {
    std::ifstream side(path + ".json");
    require(side.good(), "load_field: missing sidecar for " + path);
    nlohmann::json hdr = nlohmann::json::parse(side);
    GridSpec g;
    auto dims = hdr["dims"].get<std::vector<int>>();
    auto lo = hdr["lo"].get<std::vector<double>>();
    auto hi = hdr["hi"].get<std::vector<double>>();
    g.nd = static_cast<int>(dims.size());
    for (int d = 0; d < g.nd; ++d) {
        g.cells[d] = dims[d];
        g.lo[d] = lo[d];
        g.hi[d] = hi[d];
    }
    FieldState s(g, hdr["k"].get<int>(), hdr["eps"].get<double>(), hdr["t"].get<double>());
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "load_field: cannot open " + path);
    for (int c = 0; c < s.k; ++c)
        in.read(reinterpret_cast<char*>(s.u[c].data()),
                static_cast<std::streamsize>(s.u[c].size() * sizeof(double)));
    for (int c = 0; c < s.k; ++c)
        in.read(reinterpret_cast<char*>(s.ut[c].data()),
                static_cast<std::streamsize>(s.ut[c].size() * sizeof(double)));
    require(in.good(), "load_field: truncated payload in " + path);
    return s;
}

// CSV export of a 1-D or 2-D slice of component c (17 significant digits).
inline void field_slice_csv(const FieldState& s, int c, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    require(f != nullptr, "field_slice_csv: cannot open " + path);
    if (s.grid.nd == 1) {
        std::fprintf(f, "x,u\n");
        for (int i = 0; i < s.grid.cells[0]; ++i)
            std::fprintf(f, "%.17g,%.17g\n", s.grid.coord(i, 0), s.u[c][s.grid.index(i)]);
    } else {
        std::fprintf(f, "x1,x2,u\n");
        int kk = s.grid.nd == 3 ? s.grid.cells[2] / 2 : 0;
        for (int i = 0; i < s.grid.cells[0]; ++i)
            for (int j = 0; j < s.grid.cells[1]; ++j)
                std::fprintf(f, "%.17g,%.17g,%.17g\n", s.grid.coord(i, 0), s.grid.coord(j, 1),
                             s.u[c][s.grid.index(i, j, kk)]);
    }
    std::fclose(f);
}

}  // namespace glwave
