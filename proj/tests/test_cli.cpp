#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pvx/cli.hpp"

using namespace pvx;

namespace {

int run(std::initializer_list<const char*> args) {
    std::vector<const char*> argv{"pvx"};
    argv.insert(argv.end(), args);
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string temp_path(const char* name) {
    return std::string("/tmp/pvx_cli_") + name;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string simple_config(const std::string& traj, const std::string& summary) {
    Json j;
    j["domain"] = {{"kind", "disk"}};
    j["vortices"] = {{"positions", {{0.5, 0.0}}}, {"masses", {kTwoPi}}};
    j["run"] = {{"horizon", 1.0}};
    j["output"] = {{"trajectory", traj}, {"summary", summary}};
    j["seed"] = 7;
    return j.dump(2);
}

}  // namespace

TEST_CASE("simulate writes a trajectory and a summary") {
    std::string cfgp = temp_path("sim.json");
    std::string traj = temp_path("sim_traj.jsonl");
    std::string summ = temp_path("sim_summary.json");
    write_file(cfgp, simple_config(traj, summ));

    REQUIRE(run({"simulate", "--config", cfgp.c_str()}) == 0);

    Json summary = Json::parse(read_file(summ));
    CHECK(summary.at("tool_version").get<std::string>() == kToolVersion);
    CHECK(summary.contains("config_hash"));
    CHECK(summary.at("seed").get<std::uint64_t>() == 7);
    CHECK(summary.at("wall_clock_seconds").get<double>() >= 0.0);
    CHECK(summary.at("termination").get<std::string>() == "horizon");

    // Every line is a record with t, x, H and d.
    std::ifstream in(traj);
    std::string line;
    std::size_t lines = 0;
    double last_t = -1.0;
    while (std::getline(in, line)) {
        Json rec = Json::parse(line);
        REQUIRE(rec.contains("t"));
        REQUIRE(rec.at("x").size() == 2);
        REQUIRE(rec.contains("H"));
        REQUIRE(rec.contains("d"));
        CHECK(rec.at("t").get<double>() > last_t);
        last_t = rec.at("t").get<double>();
        ++lines;
    }
    CHECK(lines == summary.at("steps").get<std::size_t>());
    CHECK(last_t == 1.0);
}

TEST_CASE("emitted files round-trip byte for byte") {
    std::string cfgp = temp_path("rt.json");
    std::string traj = temp_path("rt_traj.jsonl");
    std::string summ = temp_path("rt_summary.json");
    write_file(cfgp, simple_config(traj, summ));
    REQUIRE(run({"simulate", "--config", cfgp.c_str()}) == 0);

    std::string raw = read_file(summ);
    CHECK(Json::parse(raw).dump(2) + "\n" == raw);

    std::ifstream in(traj);
    std::string line;
    while (std::getline(in, line)) CHECK(Json::parse(line).dump() == line);
}

TEST_CASE("regularized simulate can emit the phi series") {
    std::string cfgp = temp_path("reg.json");
    std::string traj = temp_path("reg_traj.jsonl");
    Json j;
    j["domain"] = {{"kind", "disk"}};
    j["vortices"] = {{"positions", {{0.3, 0.0}, {-0.3, 0.0}}}, {"masses", {1.0, 1.0}}};
    j["regularization"] = {{"enabled", true}, {"epsilon", 1e-2}, {"eta", 0.1}};
    j["run"] = {{"horizon", 0.5}};
    j["output"] = {{"trajectory", traj}, {"summary", temp_path("reg_summary.json")},
                   {"phi_series", true}};
    j["seed"] = 3;
    write_file(cfgp, j.dump(2));

    REQUIRE(run({"simulate", "--config", cfgp.c_str()}) == 0);
    std::ifstream in(traj);
    std::string line;
    REQUIRE(std::getline(in, line));
    Json rec = Json::parse(line);
    REQUIRE(rec.contains("phi_eps"));
    CHECK(rec.at("phi_eps").get<double>() > 0.0);
}

TEST_CASE("schema violations exit with code 2") {
    std::string cfgp = temp_path("bad.json");

    SECTION("invalid annulus radius") {
        Json j;
        j["domain"] = {{"kind", "annulus"}, {"rho", 1.5}};
        j["vortices"] = {{"positions", {{0.5, 0.0}}}};
        write_file(cfgp, j.dump());
        CHECK(run({"simulate", "--config", cfgp.c_str()}) == 2);
    }
    SECTION("unknown key") {
        Json j;
        j["domain"] = {{"kind", "disk"}, {"radius", 2.0}};
        j["vortices"] = {{"positions", {{0.5, 0.0}}}};
        write_file(cfgp, j.dump());
        CHECK(run({"simulate", "--config", cfgp.c_str()}) == 2);
    }
    SECTION("unknown top-level key") {
        Json j;
        j["domain"] = {{"kind", "disk"}};
        j["vortices"] = {{"positions", {{0.5, 0.0}}}};
        j["extra"] = 1;
        write_file(cfgp, j.dump());
        CHECK(run({"simulate", "--config", cfgp.c_str()}) == 2);
    }
    SECTION("not JSON at all") {
        write_file(cfgp, "horizon = 1.0\n");
        CHECK(run({"simulate", "--config", cfgp.c_str()}) == 2);
    }
    SECTION("missing file") {
        CHECK(run({"simulate", "--config", "/tmp/pvx_cli_does_not_exist.json"}) == 2);
    }
    SECTION("kappa out of range") {
        Json j;
        j["domain"] = {{"kind", "disk"}};
        j["run"] = {{"kappa", 1.0}, {"levels", {2000}}};
        write_file(cfgp, j.dump());
        CHECK(run({"verify-inequalities", "--config", cfgp.c_str()}) == 2);
    }
}

TEST_CASE("verify commands pass on the disk and detect injected faults") {
    std::string cfgp = temp_path("verify.json");
    Json j;
    j["domain"] = {{"kind", "disk"}};
    j["run"] = {{"sample_count", 1200}};
    j["output"] = {{"summary", temp_path("verify_summary.json")}};
    j["seed"] = 5;
    write_file(cfgp, j.dump(2));

    CHECK(run({"verify-greens", "--config", cfgp.c_str()}) == 0);
    CHECK(run({"verify-bounds", "--config", cfgp.c_str()}) == 0);

    setenv("PVX_FAULT", "kernel", 1);
    CHECK(run({"verify-greens", "--config", cfgp.c_str()}) == 3);
    CHECK(run({"verify-bounds", "--config", cfgp.c_str()}) == 3);
    unsetenv("PVX_FAULT");
}

TEST_CASE("ensemble command writes the collapse curve") {
    std::string cfgp = temp_path("ens.json");
    std::string summ = temp_path("ens_summary.json");
    std::string csv = temp_path("ens_curve.csv");
    Json j;
    j["domain"] = {{"kind", "disk"}};
    j["vortices"] = {{"sampler", {{"n", 2}, {"count", 40}, {"masses", {1.0, 1.0}}}}};
    j["run"] = {{"horizon", 1.0}, {"delta_grid", {1e-1, 1e-2}}};
    j["output"] = {{"summary", summ}, {"collapse_csv", csv}};
    j["seed"] = 21;
    write_file(cfgp, j.dump(2));

    REQUIRE(run({"ensemble", "--config", cfgp.c_str()}) == 0);
    Json summary = Json::parse(read_file(summ));
    REQUIRE(summary.at("collapse_fraction").size() == 2);
    CHECK(summary.at("sample_count").get<std::size_t>() == 40);
    std::string curve = read_file(csv);
    CHECK(curve.rfind("delta,fraction,ci_low,ci_high\n", 0) == 0);

    // The report subcommand prints the headline fields.
    CHECK(run({"report", "--input", summ.c_str()}) == 0);
}

TEST_CASE("seed flag overrides the configured seed") {
    std::string cfgp = temp_path("seed.json");
    std::string summ = temp_path("seed_summary.json");
    write_file(cfgp, simple_config("", summ));
    REQUIRE(run({"simulate", "--config", cfgp.c_str(), "--seed", "99"}) == 0);
    Json summary = Json::parse(read_file(summ));
    CHECK(summary.at("seed").get<std::uint64_t>() == 99);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run({"no-such-command"}) == 2);
    CHECK(run({"simulate"}) == 2);  // --config is required
    CHECK(run({"report", "--input", "/tmp/pvx_cli_missing_report.json"}) == 2);
}
