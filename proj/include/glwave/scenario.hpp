#pragma once

#include <chrono>
#include <set>
#include <sstream>

#include "glwave/initial_data.hpp"
#include "glwave/io.hpp"

namespace glwave {

// ---------------------------------------------------------------------------
// Scenario configuration: INI-style sections (diffable) with a JSON mirror.
// ---------------------------------------------------------------------------

struct ConfigError : GlwError {
    using GlwError::GlwError;
};

enum class ScenarioKind { StaticPlane, Circle, RigidWiggle, WigglyFamily, RigidVortexLine };

inline std::string kind_name(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::StaticPlane: return "static-plane";
        case ScenarioKind::Circle: return "circle";
        case ScenarioKind::RigidWiggle: return "rigid-wiggle";
        case ScenarioKind::WigglyFamily: return "wiggly-family";
        case ScenarioKind::RigidVortexLine: return "rigid-vortex-line";
    }
    return "?";
}

struct Scenario {
    std::string name = "unnamed";
    ScenarioKind kind = ScenarioKind::Circle;
    int k = 1;
    double radius = 1.0;           // circle
    double amplitude = 0.0;        // wiggle kinds
    double wavelength = 1.0;
    std::string profile = "kink";  // kink | sn (rigid-wiggle only)
    std::vector<double> epsilons = {0.1, 0.05, 0.025};

    double box = 1.7;         // transverse half-width
    int cells_per_eps = 10;   // transverse resolution h = eps / cells_per_eps
    int cells_fixed = 0;      // overrides cells_per_eps when > 0
    int x1_cells = 64;        // longitudinal cells (3-D only)

    double rho0 = 0.55, rho1 = 0.25;
    double T0 = 0.4, T1 = 0.45;

    double cfl = 0.5;
    double t_end = 0.4;
    double snapshot_cadence = 0.01;
    int retain_every = 5;
    std::set<std::string> probes = {"zeta", "gap", "track", "d2", "lightcone"};

    double kappa3 = 0.1, kappa4 = 0.25;
    int zeta_m1 = 96;
    int zeta_samples = 9;

    std::string out_dir;
    int threads = 0;
    std::uint64_t seed = 12345;

    int N() const { return 1 + k; }

    void validate() const {
        if (k != 1 && k != 2) throw ConfigError("scenario: k must be 1 or 2");
        if (epsilons.empty()) throw ConfigError("scenario: epsilon list is empty");
        for (std::size_t i = 1; i < epsilons.size(); ++i)
            if (epsilons[i] >= epsilons[i - 1])
                throw ConfigError("scenario: epsilon list must be strictly decreasing");
        if (kind == ScenarioKind::RigidVortexLine && k != 2)
            throw ConfigError("scenario: rigid-vortex-line needs k = 2");
        if (kind != ScenarioKind::RigidVortexLine && k != 1)
            throw ConfigError("scenario: planar kinds need k = 1");
        if (T1 <= T0) throw ConfigError("scenario: need T1 > T0");
        if (rho1 >= rho0) throw ConfigError("scenario: need rho1 < rho0");
    }

    // scientific configuration only: output paths and thread counts do not
    // change results and stay out of the hash
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["scenario"] = {{"name", name},
                         {"kind", kind_name(kind)},
                         {"k", k},
                         {"radius", radius},
                         {"amplitude", amplitude},
                         {"wavelength", wavelength},
                         {"profile", profile},
                         {"epsilons", epsilons}};
        j["grid"] = {{"box", box},
                     {"cells_per_eps", cells_per_eps},
                     {"cells", cells_fixed},
                     {"x1_cells", x1_cells}};
        j["chart"] = {{"rho0", rho0}, {"rho1", rho1}, {"T0", T0}, {"T1", T1}};
        j["run"] = {{"cfl", cfl},
                    {"t_end", t_end},
                    {"snapshot_cadence", snapshot_cadence},
                    {"retain_every", retain_every},
                    {"probes", std::vector<std::string>(probes.begin(), probes.end())},
                    {"kappa3", kappa3},
                    {"kappa4", kappa4},
                    {"zeta_m1", zeta_m1},
                    {"zeta_samples", zeta_samples}};
        return j;
    }

    std::string config_hash() const { return hex64(fnv1a64(to_json().dump())); }
};

namespace detail {
inline std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (...) {
            throw ConfigError("config line " + std::to_string(line) + ": bad number '" + tok +
                              "'");
        }
    }
    return out;
}
inline std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}
}  // namespace detail

inline Scenario parse_scenario_ini(std::istream& in) {
    Scenario sc;
    std::string section, line;
    int ln = 0;
    auto bad = [&](const std::string& what) {
        return ConfigError("config line " + std::to_string(ln) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++ln;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw bad("unterminated section header");
            section = s.substr(1, s.size() - 2);
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw bad("expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));
        auto num = [&]() {
            try {
                return std::stod(val);
            } catch (...) {
                throw bad("bad number '" + val + "'");
            }
        };
        if (section == "scenario") {
            if (key == "name") sc.name = val;
            else if (key == "kind") {
                if (val == "static-plane") sc.kind = ScenarioKind::StaticPlane;
                else if (val == "circle") sc.kind = ScenarioKind::Circle;
                else if (val == "rigid-wiggle") sc.kind = ScenarioKind::RigidWiggle;
                else if (val == "wiggly-family") sc.kind = ScenarioKind::WigglyFamily;
                else if (val == "rigid-vortex-line") sc.kind = ScenarioKind::RigidVortexLine;
                else throw bad("unknown scenario kind '" + val + "'");
            } else if (key == "k") sc.k = static_cast<int>(num());
            else if (key == "radius") sc.radius = num();
            else if (key == "amplitude") sc.amplitude = num();
            else if (key == "wavelength") sc.wavelength = num();
            else if (key == "profile") sc.profile = val;
            else if (key == "epsilons") sc.epsilons = detail::parse_list(val, ln);
            else throw bad("unknown key '" + key + "' in [scenario]");
        } else if (section == "grid") {
            if (key == "box") sc.box = num();
            else if (key == "cells_per_eps") sc.cells_per_eps = static_cast<int>(num());
            else if (key == "cells") sc.cells_fixed = static_cast<int>(num());
            else if (key == "x1_cells") sc.x1_cells = static_cast<int>(num());
            else throw bad("unknown key '" + key + "' in [grid]");
        } else if (section == "chart") {
            if (key == "rho0") sc.rho0 = num();
            else if (key == "rho1") sc.rho1 = num();
            else if (key == "T0") sc.T0 = num();
            else if (key == "T1") sc.T1 = num();
            else throw bad("unknown key '" + key + "' in [chart]");
        } else if (section == "run") {
            if (key == "cfl") sc.cfl = num();
            else if (key == "t_end") sc.t_end = num();
            else if (key == "snapshot_cadence") sc.snapshot_cadence = num();
            else if (key == "retain_every") sc.retain_every = static_cast<int>(num());
            else if (key == "kappa3") sc.kappa3 = num();
            else if (key == "kappa4") sc.kappa4 = num();
            else if (key == "zeta_m1") sc.zeta_m1 = static_cast<int>(num());
            else if (key == "zeta_samples") sc.zeta_samples = static_cast<int>(num());
            else if (key == "probes") {
                sc.probes.clear();
                std::stringstream ss(val);
                std::string tok;
                while (std::getline(ss, tok, ',')) sc.probes.insert(detail::trim(tok));
            } else throw bad("unknown key '" + key + "' in [run]");
        } else if (section == "output") {
            if (key == "dir") sc.out_dir = val;
            else throw bad("unknown key '" + key + "' in [output]");
        } else {
            throw bad("unknown section [" + section + "]");
        }
    }
    sc.validate();
    return sc;
}

inline Scenario parse_scenario_json(const nlohmann::json& j) {
    // accept the same structure the scenario serializes to
    std::stringstream ini;
    auto emit = [&](const char* section, const nlohmann::json& obj) {
        if (!obj.is_object()) return;
        ini << "[" << section << "]\n";
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            ini << it.key() << " = ";
            if (it.value().is_array()) {
                bool first = true;
                for (const auto& v : it.value()) {
                    ini << (first ? "" : ", ")
                        << (v.is_string() ? v.get<std::string>() : v.dump());
                    first = false;
                }
            } else if (it.value().is_string()) {
                ini << it.value().get<std::string>();
            } else {
                ini << it.value().dump();
            }
            ini << "\n";
        }
    };
    if (j.contains("scenario")) emit("scenario", j["scenario"]);
    if (j.contains("grid")) emit("grid", j["grid"]);
    if (j.contains("chart")) emit("chart", j["chart"]);
    if (j.contains("run")) emit("run", j["run"]);
    if (j.contains("output")) emit("output", j["output"]);
    std::stringstream in(ini.str());
    return parse_scenario_ini(in);
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot open config " + path);
    // JSON mirror detection: first non-space character is '{'
    char c = 0;
    while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
    }
    in.seekg(0);
    if (c == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("JSON config parse error: ") + e.what());
        }
        return parse_scenario_json(j);
    }
    return parse_scenario_ini(in);
}

// ---------------------------------------------------------------------------
// Streaming probes.
// ---------------------------------------------------------------------------

// zeta series over shrinking windows, evaluated as soon as the snapshot ring
// covers each slice's time span
class ZetaSeriesProbe {
   public:
    ZetaSeriesProbe(const TubularChart& chart, const PotentialModel& model, double kappa1,
                    double rho1, int n_samples, const OmegaDictionary* dict, double kappa3,
                    double kappa4, int m1, int threads = 0)
        : chart_(chart), model_(model), dict_(dict), field_(model, threads), kappa1_(kappa1),
          m1_(m1) {
        require(chart_.has_constants(), "ZetaSeriesProbe: run cone_slope on the chart first");
        const ChartConstants& cc = chart_.constants();
        series_.c_star = cc.c_star;
        series_.kappa2 = cc.kappa2;
        series_.rho1 = rho1;
        series_.kappa3 = kappa3;
        series_.kappa4 = kappa4;
        double s_max = std::min(rho1 / (2 * cc.c_star), chart_.T1 * 0.95);
        for (int i = 0; i < n_samples; ++i)
            pending_.push_back(s_max * i / std::max(1, n_samples - 1));
    }

    void operator()(const FieldState& s) {
        if (last_t_ > -1e300) cadence_ = s.time - last_t_;
        last_t_ = s.time;
        field_.push(s);
        series_.delta_eps = delta_eps(chart_.k, s.eps, kappa1_);
        while (!pending_.empty()) {
            double sj = pending_.front();
            double w = series_.rho1 - series_.c_star * sj;
            double B = w * time_halfwidth(sj) + std::max(cadence_, 1e-6);
            if (field_.t_back() < sj + B) break;
            int mnu = 2 * static_cast<int>(std::ceil(4 * w / s.eps)) + 1;
            mnu = std::min(mnu, 501);
            PulledBackField v = pullback_slice(field_, chart_, sj, w, m1_, mnu);
            series_.rows.push_back(zeta_row(v, model_, series_.delta_eps, series_.rho1,
                                            series_.c_star, series_.kappa2, dict_,
                                            series_.kappa3, series_.kappa4));
            pending_.pop_front();
            if (!pending_.empty()) {
                double keep = pending_.front() - series_.rho1 * 0.7 - 2 * cadence_;
                field_.drop_before(keep);
            }
        }
    }

    bool complete() const { return pending_.empty(); }
    const DiagnosticSeries& series() const { return series_; }

   private:
    double time_halfwidth(double s) const {
        double worst = 0;
        for (int i = 0; i < 32; ++i) {
            ChartJet cj = chart_.jet(s, i / 32.0);
            for (int a = 0; a < chart_.k; ++a) worst = std::max(worst, std::abs(cj.nu[a][0]));
        }
        return worst + 0.05;
    }
    const TubularChart& chart_;
    PotentialModel model_;
    const OmegaDictionary* dict_;
    SpacetimeField field_;
    double kappa1_;
    int m1_;
    double cadence_ = 0.01, last_t_ = -2e300;
    std::deque<double> pending_;
    DiagnosticSeries series_;
};

// int_N d^2 e_eps over the run, with the energy outside the chart tracked
// separately (k = 1)
class DistanceEnergyProbe {
   public:
    DistanceEnergyProbe(const TubularChart& chart, const PotentialModel& model, int stride = 2,
                        int threads = 0)
        : chart_(chart), model_(model), stride_(stride), threads_(threads) {}

    void operator()(const FieldState& s) {
        if (count_++ % stride_ != 0) {
            last_t_ = s.time;
            return;
        }
        double dt_weight = count_ == 1 ? 0.0 : (s.time - last_acc_t_);
        last_acc_t_ = s.time;
        last_t_ = s.time;
        if (dt_weight <= 0) {
            // first snapshot: start the clock
            ensure_cache(s);
            return;
        }
        ensure_cache(s);
        ChartSliceClassifier classifier(chart_, s.time);
        std::vector<double> e = energy_density(s, model_);
        const GridSpec& g = s.grid;
        std::size_t rows = g.cells[0];
        std::size_t rl = g.node_count() / rows;
        std::vector<double> in_rows(rows, 0.0), out_rows(rows, 0.0);
        parallel_for(rows, [&](std::size_t rlo, std::size_t rhi) {
            for (std::size_t r = rlo; r < rhi; ++r) {
                double acc_in = 0, acc_out = 0;
                for (std::size_t q = 0; q < rl; ++q) {
                    std::size_t i = r * rl + q;
                    int id[3];
                    g.unindex(i, id);
                    Vec tx(chart_.dim());
                    tx[0] = s.time;
                    for (int d = 0; d < g.nd; ++d) tx[1 + d] = g.coord(id[d], d);
                    const Vec* hint = valid_[i] ? &cache_[i] : nullptr;
                    auto inv = classifier.invert(tx, hint);
                    if (inv.inside) {
                        cache_[i] = inv.y;
                        valid_[i] = 1;
                        double d = inv.y[2];
                        acc_in += d * d * e[i];
                    } else {
                        valid_[i] = 0;
                        acc_out += e[i];
                    }
                }
                in_rows[r] = acc_in * g.cell_volume();
                out_rows[r] = acc_out * g.cell_volume();
            }
        }, threads_);
        d2_integral_ += dt_weight * tree_sum(in_rows);
        outside_integral_ += dt_weight * tree_sum(out_rows);
    }

    double d2_integral() const { return d2_integral_; }
    double outside_integral() const { return outside_integral_; }

   private:
    void ensure_cache(const FieldState& s) {
        if (cache_.size() != s.grid.node_count()) {
        cache_.assign(s.grid.node_count(), Vec(chart_.dim()));
            valid_.assign(s.grid.node_count(), 0);
        }
    }
    const TubularChart& chart_;
    PotentialModel model_;
    int stride_, threads_;
    long count_ = 0;
    double last_t_ = 0, last_acc_t_ = 0;
    double d2_integral_ = 0, outside_integral_ = 0;
    std::vector<Vec> cache_;
    std::vector<char> valid_;
};

// tracked defect radius against a closed-form oracle (k = 1, circle)
class RadiusTrackProbe {
   public:
    RadiusTrackProbe(double R, int stride = 5) : R_(R), stride_(stride) {}
    void operator()(const FieldState& s) {
        if (count_++ % stride_ != 0) return;
        auto pts = track_defect_scalar(s);
        if (pts.empty()) {
            found_all_ = false;
            return;
        }
        auto stat = radius_of_locus(pts, 0.0, 0.0);
        double expect = R_ * std::cos(s.time / R_);
        times_.push_back(s.time);
        radii_.push_back(stat.mean);
        expected_.push_back(expect);
        max_err_ = std::max(max_err_, std::abs(stat.mean - expect));
    }
    double max_error() const { return max_err_; }
    bool found_all() const { return found_all_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& radii() const { return radii_; }
    const std::vector<double>& expected() const { return expected_; }

   private:
    double R_;
    int stride_;
    long count_ = 0;
    double max_err_ = 0;
    bool found_all_ = true;
    std::vector<double> times_, radii_, expected_;
};

// tracked vortex center against the rigid oracle g(x1 - t) (k = 2)
class CenterTrackProbe {
   public:
    CenterTrackProbe(std::function<Vec(double)> g, std::array<double, 2> core,
                     double window_radius, int stride = 5)
        : g_(std::move(g)), core_(core), window_(window_radius), stride_(stride) {}
    void operator()(const FieldState& s) {
        if (count_++ % stride_ != 0) return;
        double t = s.time;
        VortexTrack tr = track_defect_vortex(
            s,
            [&](double x1, double& hx, double& hy) {
                Vec gg = g_(x1 - t);
                hx = core_[0] + gg[0];
                hy = core_[1] + gg[1];
            },
            window_);
        for (std::size_t i = 0; i < tr.x1.size(); ++i) {
            if (!tr.found[i]) {
                found_all_ = false;
                continue;
            }
            Vec gg = g_(tr.x1[i] - t);
            double ex = core_[0] + gg[0], ey = core_[1] + gg[1];
            max_err_ = std::max(max_err_, std::hypot(tr.cx[i] - ex, tr.cy[i] - ey));
        }
    }
    double max_error() const { return max_err_; }
    bool found_all() const { return found_all_; }

   private:
    std::function<Vec(double)> g_;
    std::array<double, 2> core_;
    double window_;
    int stride_;
    long count_ = 0;
    double max_err_ = 0;
    bool found_all_ = true;
};

// ---------------------------------------------------------------------------
// Run reports.
// ---------------------------------------------------------------------------

struct Measurement {
    std::string name;
    double value = 0;
    double threshold = 0;
    bool has_threshold = false;
    bool pass = true;
};

struct RunReport {
    std::string scenario_name;
    std::string config_hash;
    std::string version = "glwave 0.1.0";
    std::uint64_t seed = 0;
    std::vector<Measurement> measurements;
    std::map<std::string, double> timings;  // excluded from the hashed report

    void add(const std::string& name, double value) {
        measurements.push_back({name, value, 0, false, true});
    }
    void add_le(const std::string& name, double value, double threshold) {
        measurements.push_back({name, value, threshold, true, value <= threshold});
    }
    void add_ge(const std::string& name, double value, double threshold) {
        measurements.push_back({name, value, -threshold, true, value >= threshold});
    }
    bool all_pass() const {
        for (const auto& m : measurements)
            if (!m.pass) return false;
        return true;
    }
    const Measurement& operator[](const std::string& name) const {
        for (const auto& m : measurements)
            if (m.name == name) return m;
        throw GlwError("RunReport: no measurement " + name);
    }
    nlohmann::json to_json() const {
        nlohmann::json j;
        j["scenario"] = scenario_name;
        j["config_hash"] = config_hash;
        j["version"] = version;
        j["seed"] = seed;
        j["measurements"] = nlohmann::json::array();
        for (const auto& m : measurements) {
            nlohmann::json mj = {{"name", m.name}, {"value", m.value}, {"pass", m.pass}};
            if (m.has_threshold) mj["threshold"] = m.threshold;
            j["measurements"].push_back(mj);
        }
        return j;
    }
};

// ---------------------------------------------------------------------------
// Scenario geometry builders.
// ---------------------------------------------------------------------------

struct CircleSetup {
    SurfaceParametrization surface;
    std::shared_ptr<FrameField> frame;
    TubularChart chart;
    ChartConstants constants;
};

inline SurfaceParametrization make_circle_surface(double R, double t_half, int m = 192) {
    auto be = std::make_shared<AnalyticSurface>(
        2,
        [R](double t, double y1) {
            double r = R * std::cos(t / R);
            return Vec{r * std::cos(2 * PI * y1), r * std::sin(2 * PI * y1)};
        },
        [R](double t, double y1) {
            double rp = -std::sin(t / R);
            return Vec{rp * std::cos(2 * PI * y1), rp * std::sin(2 * PI * y1)};
        },
        [R](double t, double y1) {
            double r = R * std::cos(t / R);
            return Vec{-2 * PI * r * std::sin(2 * PI * y1), 2 * PI * r * std::cos(2 * PI * y1)};
        });
    return make_surface(be, -t_half, t_half, m, 17);
}

inline CircleSetup make_circle_setup(const Scenario& sc) {
    CircleSetup setup{make_circle_surface(sc.radius, sc.T1 + 0.1), nullptr, {}, {}};
    setup.frame = normal_frame(setup.surface, 1, FrameOrientation::OutwardRadial);
    setup.chart = build_chart(setup.surface, setup.frame, sc.rho0, sc.T1);
    setup.constants = cone_slope(setup.chart, 300, sc.seed);
    return setup;
}

inline GridSpec make_grid(const Scenario& sc, double eps) {
    GridSpec g;
    if (sc.k == 1) {
        g.nd = 2;
        int n = sc.cells_fixed > 0
                    ? sc.cells_fixed
                    : ((static_cast<int>(std::ceil(2 * sc.box / (eps / sc.cells_per_eps))) + 31) /
                       32) * 32;
        g.cells = {n, n, 1};
        g.lo = {-sc.box, -sc.box, 0};
        g.hi = {sc.box, sc.box, 0};
    } else {
        g.nd = 3;
        int n = sc.cells_fixed > 0
                    ? sc.cells_fixed
                    : ((static_cast<int>(std::ceil(2 * sc.box / (eps / sc.cells_per_eps))) + 31) /
                       32) * 32;
        g.cells = {sc.x1_cells, n, n};
        g.lo = {0, -sc.box, -sc.box};
        g.hi = {1, sc.box, sc.box};
    }
    return g;
}

// ---------------------------------------------------------------------------
// Per-epsilon circle pipeline (the canonical k = 1 scenario).
// ---------------------------------------------------------------------------

struct CircleEpsResult {
    double eps = 0;
    PreparednessReport prep;
    DiagnosticSeries series;
    double sup_zeta3_ratio = 0;
    double d2_integral = 0;
    double outside_integral = 0;
    DualNormEstimate gap;
    double track_max_err = 0;
    double drift_per_time = 0;
    double cone_margin_rel = 0;
    double grid_h = 0;
};

inline CircleEpsResult run_circle_eps(const Scenario& sc, const CircleSetup& setup, double eps) {
    CircleEpsResult out;
    out.eps = eps;
    PotentialModel model = PotentialModel::quartic_scalar();
    double kappa1 = surface_tension(model).kappa1;
    KinkProfile kink = solve_kink(model);
    double rho_trunc = std::max(10.0 * eps, setup.chart.rho0);
    TruncatedProfile qt = truncate_kink(kink, rho_trunc, eps);

    GridSpec grid = make_grid(sc, eps);
    out.grid_h = grid.min_spacing();
    double R = sc.radius;
    PrepareScalarOptions popts;
    popts.threads = sc.threads;
    FieldState initial = prepare_scalar_data(
        setup.chart, qt, grid, [R](const double* x) { return std::hypot(x[0], x[1]) - R; },
        popts);

    MeasureOptions mopts;
    mopts.kappa2 = setup.constants.kappa2;
    mopts.threads = sc.threads;
    out.prep = measure_preparedness(initial, setup.chart, model, kappa1, mopts);

    SolverConfig cfg;
    cfg.cfl = sc.cfl;
    cfg.t_end = sc.t_end;
    cfg.snapshot_cadence = sc.snapshot_cadence;
    cfg.retain_every = sc.retain_every;
    cfg.potential = model;
    cfg.threads = sc.threads;

    std::vector<SnapshotProbe> probes;
    auto zeta = std::make_shared<ZetaSeriesProbe>(setup.chart, model, kappa1, sc.rho1,
                                                  sc.zeta_samples, nullptr, sc.kappa3, sc.kappa4,
                                                  sc.zeta_m1, sc.threads);
    auto denergy = std::make_shared<DistanceEnergyProbe>(setup.chart, model, 2, sc.threads);
    auto track = std::make_shared<RadiusTrackProbe>(sc.radius, sc.retain_every);
    auto gap_dict = default_tensor_dictionary(0.1 * sc.t_end, 0.9 * sc.t_end, grid);
    auto gap = std::make_shared<EmtGapProbe>(gap_dict, model, delta_eps(1, eps, kappa1),
                                             grid.nd + 1);
    {
        SurfaceParametrization window = setup.surface;
        window.t_lo = 0.0;
        window.t_hi = sc.t_end;
        SurfaceEMT emt = surface_tensor(window);
        emt.mt = 129;
        gap->set_surface(emt);
    }
    double gap_dt = sc.snapshot_cadence;
    if (sc.probes.count("zeta")) probes.push_back([zeta](const FieldState& s) { (*zeta)(s); });
    if (sc.probes.count("d2")) probes.push_back([denergy](const FieldState& s) { (*denergy)(s); });
    if (sc.probes.count("track")) probes.push_back([track](const FieldState& s) { (*track)(s); });
    if (sc.probes.count("gap"))
        probes.push_back([gap, gap_dt](const FieldState& s) { gap->feed(s, gap_dt); });

    Trajectory traj = run(initial, cfg, probes);

    // ledger drift
    double e0 = traj.energy_ledger.size() > 1 ? traj.energy_ledger[1] : traj.energy_ledger[0];
    double worst = 0;
    for (std::size_t i = 1; i < traj.energy_ledger.size(); ++i)
        worst = std::max(worst, std::abs(traj.energy_ledger[i] - e0) / e0);
    out.drift_per_time = sc.t_end > 0 ? worst / sc.t_end : worst;

    // light cone against the box boundary collar: the collar starts in
    // vacuum and the defect's cone must not reach it within the run
    if (sc.probes.count("lightcone") && traj.snapshots.size() >= 2) {
        double wc = std::max(0.08 * sc.box, 2.5 * grid.max_spacing());
        double b = sc.box;
        std::vector<Box> collar = {
            {{-b, -b, 0}, {-b + wc, b, 0}},
            {{b - wc, -b, 0}, {b, b, 0}},
            {{-b, -b, 0}, {b, -b + wc, 0}},
            {{-b, b - wc, 0}, {b, b, 0}},
        };
        double etot = total_energy(initial, model, sc.threads);
        double margin = -1e300;
        for (std::size_t i = 1; i < traj.snapshots.size(); ++i) {
            auto rep = light_cone_check(traj.snapshots[i - 1], traj.snapshots[i], collar, model,
                                        1e-6 * etot);
            margin = std::max(margin, rep.margin);
        }
        out.cone_margin_rel = margin / etot;
    }

    out.series = zeta->series();
    for (const auto& row : out.series.rows)
        out.sup_zeta3_ratio = std::max(out.sup_zeta3_ratio, row.zeta3 / out.prep.zeta0);
    out.d2_integral = denergy->d2_integral();
    out.outside_integral = denergy->outside_integral();
    out.gap = gap->estimate();
    out.track_max_err = track->max_error();
    return out;
}

// ---------------------------------------------------------------------------
// Exact kink-train runs (criterion-style L2 reproduction of the rigid
// solution).  A periodic sn train is the torus-compatible rigid kink.
// ---------------------------------------------------------------------------

struct SnTrainSpec {
    double eps, m, A, B, amp, lam;
    static SnTrainSpec make(double eps, double height, double amp, double lam) {
        SnTrainSpec s;
        s.eps = eps;
        s.amp = amp;
        s.lam = lam;
        double target = height / eps;
        require(target > 2 * PI + 1e-6, "SnTrainSpec: eps too large for the box height");
        double lo = 1e-12, hi = 1 - 1e-14;
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            ((4 * ellint_K(mid) * std::sqrt(1 + mid)) < target ? lo : hi) = mid;
        }
        s.m = 0.5 * (lo + hi);
        s.A = std::sqrt(2 * s.m / (1 + s.m));
        s.B = std::sqrt(1 + s.m);
        return s;
    }
    double g(double w) const { return amp * std::sin(2 * PI * w / lam); }
    double gp(double w) const { return amp * 2 * PI / lam * std::cos(2 * PI * w / lam); }
    double value(double t, double x1, double x2) const {
        return A * jacobi_sn((x2 - g(x1 - t)) / (eps * B), m);
    }
    double ut(double t, double x1, double x2) const {
        auto e = jacobi_elliptic((x2 - g(x1 - t)) / (eps * B), m);
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

struct SnTrainResult {
    double l2_error = 0;
    double drift_per_time = 0;
    int cells = 0;
};

inline SnTrainResult run_sn_train(double eps, int cells, double amp, double lam, double t_end,
                                  double cfl = 0.5, int threads = 0) {
    SnTrainSpec ex = SnTrainSpec::make(eps, 1.0, amp, lam);
    GridSpec g;
    g.nd = 2;
    g.cells = {cells, cells, 1};
    g.lo = {0, -0.5, 0};
    g.hi = {1, 0.5, 0};
    FieldState initial = ex.sample(g, 0.0);
    SolverConfig cfg;
    cfg.cfl = cfl;
    cfg.t_end = t_end;
    cfg.snapshot_cadence = t_end / 4;
    cfg.retain_every = 4;
    cfg.threads = threads;
    Trajectory tr = run(initial, cfg);
    const FieldState& last = tr.snapshots.back();
    FieldState exact = ex.sample(g, last.time);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < last.u[0].size(); ++i) {
        double d = last.u[0][i] - exact.u[0][i];
        num += d * d;
        den += exact.u[0][i] * exact.u[0][i];
    }
    SnTrainResult out;
    out.cells = cells;
    out.l2_error = std::sqrt(num / den);
    double e0 = tr.energy_ledger[1];
    double worst = 0;
    for (std::size_t i = 1; i < tr.energy_ledger.size(); ++i)
        worst = std::max(worst, std::abs(tr.energy_ledger[i] - e0) / e0);
    out.drift_per_time = worst / t_end;
    return out;
}

// ---------------------------------------------------------------------------
// Wiggly family: analytic rigid solutions u_eps with g = a sin(2 pi x / lam),
// no time stepping.  Produces the nodewise tensor deviation from the
// closed-form matrix and the dictionary gap to the flat surface.
// ---------------------------------------------------------------------------

struct WigglyResult {
    double lam = 0;
    double matrix_rel_err = 0;       // max nodewise deviation / tensor scale
    double matrix_rel_err_half = 0;  // same at twice the resolution
    double gap_to_flat = 0;
};

inline WigglyResult run_wiggly(double eps, double amp, double lam, int cells, double T0,
                               int threads = 0) {
    WigglyResult out;
    out.lam = lam;
    PotentialModel model = PotentialModel::quartic_scalar();
    double kappa1 = surface_tension(model).kappa1;
    auto q = [](double s) { return std::tanh(s / std::sqrt(2.0)); };
    auto qp = [](double s) {
        double c = std::cosh(s / std::sqrt(2.0));
        return 1.0 / (std::sqrt(2.0) * c * c);
    };
    auto gfun = [amp, lam](double w) { return amp * std::sin(2 * PI * w / lam); };
    auto gpfun = [amp, lam](double w) { return amp * 2 * PI / lam * std::cos(2 * PI * w / lam); };

    auto sample = [&](const GridSpec& g, double t) {
        FieldState s(g, 1, eps, t);
        for (int i = 0; i < g.cells[0]; ++i)
            for (int j = 0; j < g.cells[1]; ++j) {
                double x1 = g.coord(i, 0), x2 = g.coord(j, 1);
                double z = (x2 - gfun(x1 - t)) / eps;
                s.u[0][g.index(i, j)] = q(z);
                s.ut[0][g.index(i, j)] = qp(z) * gpfun(x1 - t) / eps;
            }
        return s;
    };

    auto matrix_err = [&](int n) {
        GridSpec g;
        g.nd = 2;
        g.cells = {n, n, 1};
        g.lo = {0, -0.5, 0};
        g.hi = {1, 0.5, 0};
        FieldState s = sample(g, 0.3 * T0);
        double worst = 0;
        for (int i = 2; i < n; i += std::max(1, n / 13))
            for (int j = n / 2 - n / 6; j < n / 2 + n / 6; j += 3) {
                Mat T = emt_at(s, i, j, 0, model);
                double x1 = g.coord(i, 0), x2 = g.coord(j, 1);
                double z = (x2 - gfun(x1 - 0.3 * T0)) / eps;
                double pref = qp(z) * qp(z) / (eps * eps);
                double gp = gpfun(x1 - 0.3 * T0);
                Mat X(3, 3);
                X(0, 0) = pref * (1 + gp * gp);
                X(0, 1) = -pref * gp * gp;
                X(0, 2) = pref * gp;
                X(1, 0) = pref * gp * gp;
                X(1, 1) = pref * (1 - gp * gp);
                X(1, 2) = pref * gp;
                X(2, 0) = -pref * gp;
                X(2, 1) = pref * gp;
                X(2, 2) = 0.0;
                worst = std::max(worst, max_abs(T - X) * eps * eps);
            }
        return worst;
    };
    out.matrix_rel_err = matrix_err(cells);
    out.matrix_rel_err_half = matrix_err(2 * cells);

    // gap to the flat surface Gamma_0 = {x2 = 0}
    GridSpec g;
    g.nd = 2;
    g.cells = {cells, cells, 1};
    g.lo = {0, -0.5, 0};
    g.hi = {1, 0.5, 0};
    auto dict = default_tensor_dictionary(0.15 * T0, 0.85 * T0, g);
    EmtGapProbe probe(dict, model, delta_eps(1, eps, kappa1), 3);
    {
        auto be = std::make_shared<AnalyticSurface>(
            2, [](double, double y1) { return Vec{y1, 0.0}; },
            [](double, double) { return Vec{0.0, 0.0}; },
            [](double, double) { return Vec{1.0, 0.0}; });
        SurfaceParametrization flat = make_surface(be, 0.0, T0, 64, 9);
        SurfaceEMT emt = surface_tensor(flat);
        emt.mt = 257;
        probe.set_surface(emt);
    }
    // time quadrature dense enough for oscillations of scale lam
    int nt = std::max(33, static_cast<int>(std::ceil(T0 / (lam / 16))) | 1);
    for (int it = 0; it < nt; ++it) {
        double t = T0 * it / (nt - 1.0);
        double w = (it == 0 || it == nt - 1) ? 0.5 : 1.0;
        probe.feed(sample(g, t), w * T0 / (nt - 1));
    }
    (void)threads;
    out.gap_to_flat = probe.estimate().gap;
    return out;
}

// ---------------------------------------------------------------------------
// Vortex line runs (k = 2).
// ---------------------------------------------------------------------------

struct VortexLineResult {
    double eps = 0;
    double disk_energy_normalized = 0;  // (pi |ln eps|)^{-1} per-unit-length disk energy
    double C_fit = 0;                   // (normalized - 1) |ln eps|
    double track_max_err = 0;
    double drift_per_time = 0;
};

inline VortexLineResult run_vortex_line(const Scenario& sc, double eps, bool evolve) {
    VortexLineResult out;
    out.eps = eps;
    PotentialModel model = PotentialModel::quartic_vector();
    GridSpec grid = make_grid(sc, eps);
    double a = sc.amplitude, lam = sc.wavelength;
    VortexLineScenario vls;
    vls.core = {-sc.box / 2, 0.0};
    vls.anticore = {sc.box / 2, 0.0};
    vls.g = [a, lam](double w) { return Vec{a * std::sin(2 * PI * w / lam), 0.0}; };
    vls.gp = [a, lam](double w) { return Vec{a * 2 * PI / lam * std::cos(2 * PI * w / lam), 0.0}; };
    FieldState initial = prepare_vector_data(grid, eps, vls, sc.threads);

    // per-unit-length disk energy around the + core at t = 0
    {
        std::vector<double> e = energy_density(initial, model);
        const GridSpec& g = grid;
        double rho = sc.rho0;
        std::vector<double> slice_sum(g.cells[0], 0.0);
        for (int i = 0; i < g.cells[0]; ++i) {
            Vec gg = vls.g(g.coord(i, 0));
            double acc = 0;
            for (int j = 0; j < g.cells[1]; ++j)
                for (int kk = 0; kk < g.cells[2]; ++kk) {
                    double d2 = g.axis_dist(g.coord(j, 1), vls.core[0] + gg[0], 1);
                    double d3 = g.axis_dist(g.coord(kk, 2), vls.core[1] + gg[1], 2);
                    if (d2 * d2 + d3 * d3 > rho * rho) continue;
                    acc += e[g.index(i, j, kk)];
                }
            slice_sum[i] = acc * g.spacing(1) * g.spacing(2);
        }
        double per_length = tree_sum(slice_sum) / g.cells[0];
        out.disk_energy_normalized = per_length / (PI * std::abs(std::log(eps)));
        out.C_fit = (out.disk_energy_normalized - 1.0) * std::abs(std::log(eps));
    }

    if (evolve) {
        SolverConfig cfg;
        cfg.cfl = sc.cfl;
        cfg.t_end = sc.t_end;
        cfg.snapshot_cadence = sc.snapshot_cadence;
        cfg.retain_every = sc.retain_every;
        cfg.potential = model;
        cfg.threads = sc.threads;
        auto track = std::make_shared<CenterTrackProbe>(vls.g, vls.core, 0.45 * sc.box,
                                                        sc.retain_every);
        std::vector<SnapshotProbe> probes = {
            [track](const FieldState& s) { (*track)(s); }};
        Trajectory tr = run(initial, cfg, probes);
        out.track_max_err = track->max_error();
        double e0 = tr.energy_ledger[1];
        double worst = 0;
        for (std::size_t i = 1; i < tr.energy_ledger.size(); ++i)
            worst = std::max(worst, std::abs(tr.energy_ledger[i] - e0) / e0);
        out.drift_per_time = worst / std::max(sc.t_end, 1e-9);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario driver: pipelines per kind, report and artifacts.
// ---------------------------------------------------------------------------

inline void write_series_csv(const DiagnosticSeries& s, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"s", "window", "zeta1", "zeta2", "zeta3", "theta1_abs", "theta1_max",
                "bad_measure", "min_good_energy", "equip_good"});
    for (const auto& r : s.rows)
        csv.row({r.s, r.window, r.zeta1, r.zeta2, r.zeta3, r.theta1_abs_integral, r.theta1_max,
                 r.bad_measure, r.min_good_energy, r.equip_good});
}

inline RunReport run_scenario(const Scenario& sc) {
    sc.validate();
    RunReport rep;
    rep.scenario_name = sc.name;
    rep.config_hash = sc.config_hash();
    rep.seed = sc.seed;
    auto t_start = std::chrono::steady_clock::now();
    auto lap = [&](const std::string& name) {
        auto now = std::chrono::steady_clock::now();
        rep.timings[name] = std::chrono::duration<double>(now - t_start).count();
    };

    std::filesystem::path out_dir;
    bool emit = !sc.out_dir.empty();
    Manifest manifest;
    if (emit) {
        out_dir = sc.out_dir;
        std::filesystem::create_directories(out_dir);
    }

    if (sc.kind == ScenarioKind::Circle) {
        CircleSetup setup = make_circle_setup(sc);
        rep.add("chart_rho0", setup.chart.rho0);
        rep.add("c_star", setup.constants.c_star);
        std::vector<double> epses, d2s, gaps, ratios;
        std::vector<SvgSeries> zeta_plot;
        for (double eps : sc.epsilons) {
            CircleEpsResult r = run_circle_eps(sc, setup, eps);
            std::string tag = "eps=" + std::to_string(eps);
            rep.add("zeta0[" + tag + "]", r.prep.zeta0);
            rep.add("d2_energy[" + tag + "]", r.d2_integral);
            rep.add("gap[" + tag + "]", r.gap.gap);
            rep.add("sup_zeta3_ratio[" + tag + "]", r.sup_zeta3_ratio);
            rep.add_le("drift_per_time[" + tag + "]", r.drift_per_time, 1e-4);
            rep.add_le("cone_margin_rel[" + tag + "]", r.cone_margin_rel, 1e-6);
            if (sc.probes.count("track"))
                rep.add_le("track_err[" + tag + "]", r.track_max_err,
                           std::max(2 * r.grid_h, 5 * eps));
            epses.push_back(eps);
            d2s.push_back(r.d2_integral);
            gaps.push_back(r.gap.gap);
            ratios.push_back(r.sup_zeta3_ratio);
            if (emit) {
                write_series_csv(r.series, (out_dir / ("series_" + tag + ".csv")).string());
                manifest.add((out_dir / ("series_" + tag + ".csv")).string());
                SvgSeries zs;
                zs.label = tag;
                for (const auto& row : r.series.rows) {
                    zs.x.push_back(row.s);
                    zs.y.push_back(row.zeta3);
                }
                zeta_plot.push_back(zs);
            }
            lap("run[" + tag + "]");
        }
        if (epses.size() >= 2) {
            auto d2fit = loglog_slope(epses, d2s);
            rep.add("d2_slope", d2fit.slope);
            rep.measurements.back().pass = std::abs(d2fit.slope - 1.0) <= 0.3;
            rep.measurements.back().has_threshold = true;
            rep.measurements.back().threshold = 0.3;
            auto gapfit = loglog_slope(epses, gaps);
            rep.add_ge("gap_slope", gapfit.slope, 0.8);
            double worst_growth = 0;
            for (std::size_t i = 1; i < ratios.size(); ++i)
                worst_growth = std::max(worst_growth, ratios[i] / std::max(ratios[i - 1], 1e-300));
            rep.add_le("zeta_ratio_growth", worst_growth, 1.25);
        }
        if (emit) {
            std::vector<SvgSeries> gap_plot(1);
            gap_plot[0].label = "gap";
            gap_plot[0].x = epses;
            gap_plot[0].y = gaps;
            write_svg_plot((out_dir / "gap_vs_eps.svg").string(), "tensor gap vs epsilon",
                           gap_plot, true);
            manifest.add((out_dir / "gap_vs_eps.svg").string());
            if (!zeta_plot.empty()) {
                write_svg_plot((out_dir / "zeta3_vs_s.svg").string(), "zeta3 along the slab",
                               zeta_plot, false);
                manifest.add((out_dir / "zeta3_vs_s.svg").string());
            }
        }
    } else if (sc.kind == ScenarioKind::RigidWiggle && sc.profile == "sn") {
        for (double eps : sc.epsilons) {
            int n = sc.cells_fixed > 0 ? sc.cells_fixed : 512;
            SnTrainResult r = run_sn_train(eps, n, sc.amplitude, sc.wavelength, sc.t_end, sc.cfl,
                                           sc.threads);
            SnTrainResult r2 = run_sn_train(eps, 2 * n, sc.amplitude, sc.wavelength, sc.t_end,
                                            sc.cfl, sc.threads);
            std::string tag = "eps=" + std::to_string(eps);
            rep.add_le("l2_error[" + tag + "]", r.l2_error, 1e-3);
            rep.add("l2_ratio[" + tag + "]", r.l2_error / r2.l2_error);
            rep.measurements.back().pass = std::abs(r.l2_error / r2.l2_error - 4.0) <= 0.8;
            rep.add_le("drift_per_time[" + tag + "]", r.drift_per_time, 1e-4);
            lap("run[" + tag + "]");
        }
    } else if (sc.kind == ScenarioKind::WigglyFamily) {
        double eps = sc.epsilons.front();
        std::vector<double> lams = {sc.wavelength, sc.wavelength / 2, sc.wavelength / 4};
        double first_gap = 0;
        for (double lam : lams) {
            double amp = sc.amplitude * lam / sc.wavelength;  // fixed a / lam
            int n = sc.cells_fixed > 0 ? sc.cells_fixed : 512;
            WigglyResult r = run_wiggly(eps, amp, lam, n, sc.T0, sc.threads);
            std::string tag = "lam=" + std::to_string(lam);
            rep.add("matrix_err[" + tag + "]", r.matrix_rel_err);
            rep.add("matrix_err_ratio[" + tag + "]",
                    r.matrix_rel_err / std::max(r.matrix_rel_err_half, 1e-300));
            rep.add("gap_to_flat[" + tag + "]", r.gap_to_flat);
            if (first_gap == 0) first_gap = r.gap_to_flat;
            lap("run[" + tag + "]");
        }
        const Measurement& last_gap = rep["gap_to_flat[lam=" + std::to_string(lams.back()) + "]"];
        rep.add_ge("gap_persistence", last_gap.value, 0.1 * first_gap);
    } else if (sc.kind == ScenarioKind::RigidVortexLine) {
        std::vector<double> epses, Cs;
        for (double eps : sc.epsilons) {
            bool evolve = sc.t_end > 0 && eps == sc.epsilons.back();
            VortexLineResult r = run_vortex_line(sc, eps, evolve);
            std::string tag = "eps=" + std::to_string(eps);
            rep.add("disk_energy_norm[" + tag + "]", r.disk_energy_normalized);
            rep.add("C_fit[" + tag + "]", r.C_fit);
            epses.push_back(eps);
            Cs.push_back(r.C_fit);
            if (evolve) {
                GridSpec g = make_grid(sc, eps);
                rep.add_le("track_err[" + tag + "]", r.track_max_err,
                           std::max(2 * g.spacing(1), 5 * eps));
                rep.add_le("drift_per_time[" + tag + "]", r.drift_per_time, 1e-4);
            }
            lap("run[" + tag + "]");
        }
        double cmin = *std::min_element(Cs.begin(), Cs.end());
        double cmax = *std::max_element(Cs.begin(), Cs.end());
        double mid = 0.5 * (cmin + cmax);
        rep.add_le("C_spread", mid != 0 ? (cmax - cmin) / std::abs(mid) : 0.0, 0.5);
    } else if (sc.kind == ScenarioKind::StaticPlane) {
        // torus-consistent kink pair, static: preparation diagnostics only
        double eps = sc.epsilons.front();
        KinkProfile kink = solve_kink(PotentialModel::quartic_scalar());
        double kappa1 = surface_tension(PotentialModel::quartic_scalar()).kappa1;
        GridSpec g = make_grid(sc, eps);
        FieldState s(g, 1, eps);
        double sep = sc.box / 2;
        double band_cap = 3 * sep / 4;
        if (10.0 * eps > band_cap)
            throw ConfigError("static-plane: box too small to truncate at this epsilon");
        TruncatedProfile qt = truncate_kink(kink, std::min(12.0 * eps, band_cap), eps);
        for (int i = 0; i < g.cells[0]; ++i)
            for (int j = 0; j < g.cells[1]; ++j) {
                double x2 = g.coord(j, 1);
                double v = x2 <= 0 ? qt.at_distance(x2 + sep) : qt.at_distance(sep - x2);
                s.u[0][g.index(i, j)] = v;
            }
        double etot = total_energy(s, PotentialModel::quartic_scalar(), sc.threads);
        // two interfaces of line energy kappa1/eps, length 2*box along x1
        double expected = 2 * (kappa1 / eps) * (2 * sc.box);
        rep.add("pair_energy_ratio", etot / expected);
        rep.measurements.back().pass = std::abs(etot / expected - 1.0) < 0.02;
        if (sc.t_end > 0) {
            SolverConfig cfg;
            cfg.t_end = sc.t_end;
            cfg.snapshot_cadence = sc.snapshot_cadence;
            cfg.threads = sc.threads;
            Trajectory tr = run(s, cfg);
            double e0 = tr.energy_ledger[1];
            double worst = 0;
            for (std::size_t i = 1; i < tr.energy_ledger.size(); ++i)
                worst = std::max(worst, std::abs(tr.energy_ledger[i] - e0) / e0);
            rep.add_le("drift_per_time", worst / sc.t_end, 1e-4);
        }
        lap("run");
    }

    lap("total");
    if (emit) {
        write_json((out_dir / "report.json").string(), rep.to_json());
        manifest.add((out_dir / "report.json").string());
        nlohmann::json tj;
        for (const auto& [k, v] : rep.timings) tj[k] = v;
        write_json((out_dir / "timings.json").string(), tj);  // not in the manifest
        write_json((out_dir / "config_echo.json").string(), sc.to_json());
        manifest.add((out_dir / "config_echo.json").string());
        manifest.write((out_dir / "manifest.json").string());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Parameter sweeps with a least-squares log-log slope.
// ---------------------------------------------------------------------------

struct SweepResult {
    std::string parameter;
    std::string metric;
    std::vector<double> param_values;
    std::vector<double> metric_values;
    SlopeFit fit;

    void write_csv(const std::string& path) const {
        CsvWriter csv(path);
        csv.header({parameter, metric});
        for (std::size_t i = 0; i < param_values.size(); ++i)
            csv.row({param_values[i], metric_values[i]});
    }
};

inline SweepResult run_sweep(const Scenario& sc, const std::string& parameter) {
    SweepResult out;
    out.parameter = parameter;
    if (parameter == "epsilon") {
        if (sc.epsilons.size() < 3)
            throw ConfigError("sweep: need at least 3 epsilon values");
        if (sc.kind == ScenarioKind::Circle) {
            out.metric = "d2_energy";
            CircleSetup setup = make_circle_setup(sc);
            for (double eps : sc.epsilons) {
                CircleEpsResult r = run_circle_eps(sc, setup, eps);
                out.param_values.push_back(eps);
                out.metric_values.push_back(r.d2_integral);
            }
        } else if (sc.kind == ScenarioKind::RigidWiggle && sc.profile == "sn") {
            out.metric = "l2_error";
            for (double eps : sc.epsilons) {
                int n = sc.cells_fixed > 0 ? sc.cells_fixed : 256;
                SnTrainResult r =
                    run_sn_train(eps, n, sc.amplitude, sc.wavelength, sc.t_end, sc.cfl, sc.threads);
                out.param_values.push_back(eps);
                out.metric_values.push_back(r.l2_error);
            }
        } else {
            throw ConfigError("sweep over epsilon: unsupported scenario kind");
        }
    } else if (parameter == "h") {
        if (sc.kind != ScenarioKind::RigidWiggle || sc.profile != "sn")
            throw ConfigError("sweep over h: use the sn rigid-wiggle scenario");
        out.metric = "l2_error";
        int base = sc.cells_fixed > 0 ? sc.cells_fixed : 128;
        double eps = sc.epsilons.front();
        for (int mult : {1, 2, 4}) {
            int n = base * mult;
            SnTrainResult r = run_sn_train(eps, n, sc.amplitude, sc.wavelength, sc.t_end, sc.cfl,
                                           sc.threads);
            out.param_values.push_back(1.0 / n);
            out.metric_values.push_back(r.l2_error);
        }
    } else {
        throw ConfigError("sweep: parameter must be 'epsilon' or 'h'");
    }
    out.fit = loglog_slope(out.param_values, out.metric_values);
    return out;
}

// Chart verification pipeline (the verify-chart verb).
inline nlohmann::json verify_chart_pipeline(const Scenario& sc) {
    require(sc.kind == ScenarioKind::Circle || sc.kind == ScenarioKind::StaticPlane ||
                sc.kind == ScenarioKind::RigidVortexLine,
            "verify-chart: unsupported scenario kind");
    nlohmann::json out;
    if (sc.kind == ScenarioKind::RigidVortexLine) {
        auto be = std::make_shared<AnalyticSurface>(
            3, [&](double, double y1) { return Vec{y1, -sc.box / 2, 0.0}; },
            [](double, double) { return Vec{0.0, 0.0, 0.0}; },
            [](double, double) { return Vec{1.0, 0.0, 0.0}; });
        SurfaceParametrization line = make_surface(be, -sc.T1 - 0.1, sc.T1 + 0.1, 64, 9);
        auto fr = normal_frame(line, 2);
        TubularChart chart = build_chart(line, fr, sc.rho0, sc.T1);
        cone_slope(chart, 200, sc.seed);
        out = verify_metric_bounds(chart, 200, 20, sc.seed).to_json();
    } else if (sc.kind == ScenarioKind::Circle) {
        CircleSetup setup = make_circle_setup(sc);
        out = verify_metric_bounds(setup.chart, 250, 24, sc.seed).to_json();
    } else {
        auto be = std::make_shared<AnalyticSurface>(
            2, [](double, double y1) { return Vec{y1, 0.0}; },
            [](double, double) { return Vec{0.0, 0.0}; },
            [](double, double) { return Vec{1.0, 0.0}; });
        SurfaceParametrization plane = make_surface(be, -sc.T1 - 0.1, sc.T1 + 0.1, 64, 9);
        auto fr = normal_frame(plane, 1);
        TubularChart chart = build_chart(plane, fr, sc.rho0, sc.T1);
        cone_slope(chart, 200, sc.seed);
        out = verify_metric_bounds(chart, 200, 20, sc.seed).to_json();
    }
    return out;
}

}  // namespace glwave
