#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgsim/csv.hpp"
#include "mgsim/engine.hpp"
#include "mgsim/scenario_io.hpp"

namespace mgsim {

inline void print_comparison(const ComparisonReport& rep, std::ostream& out) {
    out << "comparison (B relative to A):\n";
    if (!rep.conclusive) out << "  inconclusive: at least one run has unsettled DGs\n";
    if (std::isfinite(rep.settling_ratio))
        out << "  max settling-time ratio: " << format_number(rep.settling_ratio) << "\n";
    if (std::isfinite(rep.message_ratio))
        out << "  message-count ratio:     " << format_number(rep.message_ratio) << "\n";
    for (size_t k = 0; k < rep.final_error_base.size() && k < rep.final_error_other.size(); ++k)
        out << "  dg" << (k + 1) << " final error [V]: A=" << format_number(rep.final_error_base[k])
            << " B=" << format_number(rep.final_error_other[k]) << "\n";
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Droop-controlled microgrid simulator with zonal consensus secondary voltage control"};
    std::string scenario_path, preset, out_dir = "out";
    std::vector<std::string> compare_dirs;
    double dt_override = 0.0, t_end_override = 0.0;

    auto* opt_scenario = app.add_option("--scenario", scenario_path, "Scenario JSON file");
    auto* opt_preset =
        app.add_option("--preset", preset, "Bundled configuration")->check(CLI::IsMember({"zonal", "global"}));
    app.add_option("--out", out_dir, "Output directory (created if missing)");
    auto* opt_dt = app.add_option("--dt", dt_override, "Override integration step [s]");
    auto* opt_tend = app.add_option("--t-end", t_end_override, "Override simulation horizon [s]");
    auto* opt_compare =
        app.add_option("--compare", compare_dirs, "Compare metrics.json from two run directories")->expected(2);
    opt_scenario->excludes(opt_preset);
    opt_compare->excludes(opt_scenario, opt_preset, opt_dt, opt_tend);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (!compare_dirs.empty()) {
            RunMetrics m[2];
            for (int k = 0; k < 2; ++k) {
                const std::string path = compare_dirs[k] + "/metrics.json";
                std::ifstream in(path);
                if (!in) throw std::runtime_error("cannot read '" + path + "'");
                m[k] = metrics_from_json(json::parse(in));
            }
            print_comparison(compare_runs(m[0], m[1]), out);
            return 0;
        }

        ParsedScenario parsed;
        if (!scenario_path.empty())
            parsed = parse_scenario(scenario_path);
        else if (preset == "zonal")
            parsed = zonal_preset();
        else if (preset == "global")
            parsed = global_preset();
        else
            throw std::runtime_error("one of --scenario, --preset, or --compare is required");

        if (opt_dt->count()) parsed.scenario.dt = dt_override;
        if (opt_tend->count()) parsed.scenario.t_end = t_end_override;
        parsed.scenario.validate();

        const RunResult res = run_scenario(parsed.scenario);

        std::filesystem::create_directories(out_dir);
        write_text_file(out_dir + "/timeseries.csv", timeseries_csv(res.log));
        write_text_file(out_dir + "/metrics.json", metrics_to_json(res.metrics).dump(2) + "\n");
        write_text_file(out_dir + "/scenario_resolved.json",
                        serialize_scenario(parsed.scenario, parsed.defaults_applied));

        for (const auto& w : res.log.warnings) err << "warning: " << w << "\n";
        out << "wrote " << out_dir << "/timeseries.csv (" << res.log.n_samples() << " samples, "
            << res.log.n_dg() << " DGs)\n";
        int settled = 0;
        for (bool s : res.metrics.settled) settled += s ? 1 : 0;
        out << "settled DGs: " << settled << "/" << res.metrics.settled.size()
            << ", total messages: " << res.metrics.total_messages << "\n";
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace mgsim
