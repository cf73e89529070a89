#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mgsim/cli.hpp"

using namespace mgsim;
namespace fs = std::filesystem;

namespace {

int cli(const std::vector<std::string>& args, std::string& out_text, std::string& err_text) {
    std::vector<const char*> argv{"mgsim"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    out_text = out.str();
    err_text = err.str();
    return rc;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int count_columns(const std::string& header) {
    return static_cast<int>(std::count(header.begin(), header.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("zonal preset run writes the full output set") {
    const std::string dir = "cli_zonal_out";
    fs::remove_all(dir);
    std::string out, err;
    const int rc = cli({"--preset", "zonal", "--out", dir}, out, err);
    REQUIRE(rc == 0);
    CHECK(out.find("settled DGs: 6/6") != std::string::npos);
    REQUIRE(fs::exists(dir + "/timeseries.csv"));
    REQUIRE(fs::exists(dir + "/metrics.json"));
    REQUIRE(fs::exists(dir + "/scenario_resolved.json"));

    const std::string csv = slurp(dir + "/timeseries.csv");
    std::istringstream lines(csv);
    std::string header;
    std::getline(lines, header);
    CHECK(count_columns(header) == 1 + 6 * 6 + 1);
    CHECK(header.rfind("t,dg1_vod,dg1_voq,dg1_P,dg1_Q,dg1_omega,dg1_dvn,dg2_vod", 0) == 0);
    CHECK(header.find(",msg_count") != std::string::npos);
    int rows = 0;
    for (std::string line; std::getline(lines, line);)
        if (!line.empty()) ++rows;
    // one sample at t=0 plus one per decimated step
    CHECK(rows == 75000 / 10 + 1);

    // every settled per-dg entry and a final voltage near the reference
    const json metrics = json::parse(slurp(dir + "/metrics.json"));
    REQUIRE(metrics.at("per_dg").size() == 6);
    for (const json& d : metrics.at("per_dg")) {
        CHECK(d.at("settled").get<bool>());
        CHECK(d.at("final_error").get<double>() < 0.5);
    }
    CHECK(metrics.at("total_messages").get<std::int64_t>() > 0);

    // the resolved scenario re-parses to the executed configuration
    const ParsedScenario again = parse_scenario(dir + "/scenario_resolved.json");
    CHECK(again.defaults_applied.empty());
    CHECK(scenario_equal(again.scenario, zonal_preset().scenario));
}

TEST_CASE("overrides reach the resolved scenario") {
    const std::string dir = "cli_override_out";
    fs::remove_all(dir);
    std::string out, err;
    const int rc =
        cli({"--preset", "zonal", "--out", dir, "--dt", "1e-5", "--t-end", "0.002"}, out, err);
    REQUIRE(rc == 0);
    const json resolved = json::parse(slurp(dir + "/scenario_resolved.json"));
    CHECK(resolved.at("sim").at("dt").get<double>() == 1e-5);
    CHECK(resolved.at("sim").at("t_end").get<double>() == 0.002);

    const std::string csv = slurp(dir + "/timeseries.csv");
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == 1 + 200 / 10 + 1);  // header, t=0, 20 decimated steps
}

TEST_CASE("scenario files run through the same path") {
    const std::string dir = "cli_file_out";
    fs::remove_all(dir);
    const std::string path = "cli_scenario.json";
    {
        std::ofstream f(path);
        f << "{ \"sim\": { \"t_end\": 0.01 } }\n";
    }
    std::string out, err;
    REQUIRE(cli({"--scenario", path, "--out", dir}, out, err) == 0);
    CHECK(fs::exists(dir + "/metrics.json"));
}

TEST_CASE("comparison of saved metrics") {
    const std::string da = "cli_cmp_a";
    const std::string db = "cli_cmp_b";
    fs::remove_all(da);
    fs::remove_all(db);
    fs::create_directories(da);
    fs::create_directories(db);

    RunMetrics a;
    a.settled = {true, true};
    a.settling_time = {0.6, 0.8};
    a.final_error = {0.05, 0.04};
    a.total_messages = 7200;
    a.peak_deviation = 9.4;
    a.t_activate = 0.6;
    a.v_ref = 381.0;
    a.t_end = 1.5;
    RunMetrics b = a;
    b.settling_time = {1.9, 2.2};
    b.total_messages = 9000;
    write_text_file(da + "/metrics.json", metrics_to_json(a).dump(2) + "\n");
    write_text_file(db + "/metrics.json", metrics_to_json(b).dump(2) + "\n");

    std::string out, err;
    REQUIRE(cli({"--compare", da, db}, out, err) == 0);
    CHECK(out.find("max settling-time ratio: 2.75") != std::string::npos);
    CHECK(out.find("message-count ratio:     1.25") != std::string::npos);
    CHECK(out.find("dg1 final error") != std::string::npos);
}

TEST_CASE("errors exit nonzero with a diagnostic") {
    std::string out, err;

    SECTION("missing scenario file names the path") {
        CHECK(cli({"--scenario", "no_such_scenario.json"}, out, err) != 0);
        CHECK(err.find("no_such_scenario.json") != std::string::npos);
    }
    SECTION("a run mode is required") {
        CHECK(cli({}, out, err) != 0);
        CHECK_FALSE(err.empty());
    }
    SECTION("scenario and preset are mutually exclusive") {
        CHECK(cli({"--scenario", "x.json", "--preset", "zonal"}, out, err) != 0);
    }
    SECTION("unknown preset name") {
        CHECK(cli({"--preset", "galactic"}, out, err) != 0);
    }
    SECTION("compare requires two directories") {
        CHECK(cli({"--compare", "onedir"}, out, err) != 0);
    }
    SECTION("compare needs readable metrics") {
        CHECK(cli({"--compare", "missing_a", "missing_b"}, out, err) != 0);
        CHECK(err.find("missing_a/metrics.json") != std::string::npos);
    }
}
