// Scenario-driven front end: configure, run, sweep, and verify charts.
//
// Exit codes: 0 all checks pass, 2 acceptance failure, 3 configuration
// error, 4 numerical blow-up.

#include <cstdio>

#include "CLI11.hpp"
#include "glwave/scenario.hpp"

using namespace glwave;

namespace {

int cmd_run(const std::string& config, const std::string& out, int threads, std::uint64_t seed) {
    Scenario sc = load_scenario(config);
    if (!out.empty()) sc.out_dir = out;
    if (threads > 0) sc.threads = threads;
    sc.seed = seed;
    RunReport rep = run_scenario(sc);
    std::printf("scenario %s (config %s)\n", rep.scenario_name.c_str(), rep.config_hash.c_str());
    for (const auto& m : rep.measurements) {
        if (m.has_threshold)
            std::printf("  [%s] %-36s %.6g  (threshold %.3g)\n", m.pass ? "pass" : "FAIL",
                        m.name.c_str(), m.value, std::abs(m.threshold));
        else
            std::printf("  [    ] %-36s %.6g\n", m.name.c_str(), m.value);
    }
    return rep.all_pass() ? 0 : 2;
}

int cmd_sweep(const std::string& config, const std::string& param, const std::string& out,
              int threads) {
    Scenario sc = load_scenario(config);
    if (threads > 0) sc.threads = threads;
    SweepResult sr = run_sweep(sc, param);
    std::printf("sweep over %s: metric %s\n", sr.parameter.c_str(), sr.metric.c_str());
    for (std::size_t i = 0; i < sr.param_values.size(); ++i)
        std::printf("  %-12.6g %.8g\n", sr.param_values[i], sr.metric_values[i]);
    std::printf("log-log slope: %.4f\n", sr.fit.slope);
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        sr.write_csv(out + "/sweep.csv");
        SvgSeries series;
        series.label = sr.metric;
        series.x = sr.param_values;
        series.y = sr.metric_values;
        write_svg_plot(out + "/sweep.svg", sr.metric + " vs " + sr.parameter, {series}, true);
    }
    return 0;
}

int cmd_verify_chart(const std::string& config, const std::string& out) {
    Scenario sc = load_scenario(config);
    nlohmann::json j = verify_chart_pipeline(sc);
    std::printf("chart verification (%s)\n", kind_name(sc.kind).c_str());
    for (const auto& rec : j["records"]) {
        std::printf("  [%s] %-22s constant %.6g\n",
                    rec["pass"].get<bool>() ? "pass" : "FAIL",
                    rec["name"].get<std::string>().c_str(), rec["constant"].get<double>());
    }
    std::printf("  minimality residual |grad_nu sqrt(-g)| on Gamma: %.3g\n",
                j["minimality_residual"].get<double>());
    std::printf("  c* = %.6g, kappa2 = %.6g, lambda = %.6g, Lambda = %.6g\n",
                j["c_star"].get<double>(), j["kappa2"].get<double>(), j["lambda"].get<double>(),
                j["Lambda"].get<double>());
    if (!out.empty()) {
        std::filesystem::create_directories(out);
        write_json(out + "/verification.json", j);
    }
    for (const auto& rec : j["records"])
        if (!rec["pass"].get<bool>()) return 2;
    return 0;
}

int cmd_report(const std::string& in) {
    std::ifstream f(in);
    if (!f.good()) throw ConfigError("report: cannot open " + in);
    nlohmann::json j = nlohmann::json::parse(f);
    std::printf("scenario %s (config %s, %s)\n", j["scenario"].get<std::string>().c_str(),
                j["config_hash"].get<std::string>().c_str(),
                j["version"].get<std::string>().c_str());
    bool all = true;
    for (const auto& m : j["measurements"]) {
        bool pass = m["pass"].get<bool>();
        all = all && pass;
        std::printf("  [%s] %-36s %.6g\n", pass ? "pass" : "FAIL",
                    m["name"].get<std::string>().c_str(), m["value"].get<double>());
    }
    return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for semilinear waves with defects on timelike minimal "
                 "surfaces"};
    app.require_subcommand(1);

    std::string config, out, param = "epsilon", report_in;
    int threads = 0;
    std::uint64_t seed = 12345;

    auto* run_cmd = app.add_subcommand("run", "run a scenario end to end");
    run_cmd->add_option("--config", config, "scenario config (INI or JSON)")->required();
    run_cmd->add_option("--out", out, "output directory");
    run_cmd->add_option("--threads", threads, "worker threads (0 = auto)");
    run_cmd->add_option("--seed", seed, "seed for randomized verifier sampling");

    auto* sweep_cmd = app.add_subcommand("sweep", "convergence sweep with a slope fit");
    sweep_cmd->add_option("--config", config, "scenario config")->required();
    sweep_cmd->add_option("--param", param, "epsilon | h");
    sweep_cmd->add_option("--out", out, "output directory");
    sweep_cmd->add_option("--threads", threads, "worker threads");

    auto* verify_cmd = app.add_subcommand("verify-chart", "metric-bound verification report");
    verify_cmd->add_option("--config", config, "scenario config")->required();
    verify_cmd->add_option("--out", out, "output directory");

    auto* report_cmd = app.add_subcommand("report", "pretty-print a stored run report");
    report_cmd->add_option("--in", report_in, "report.json path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(config, out, threads, seed);
        if (sweep_cmd->parsed()) return cmd_sweep(config, param, out, threads);
        if (verify_cmd->parsed()) return cmd_verify_chart(config, out);
        if (report_cmd->parsed()) return cmd_report(report_in);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 3;
    } catch (const BlowUpError& e) {
        std::fprintf(stderr, "numerical blow-up: %s\n", e.what());
        return 4;
    } catch (const GlwError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
