#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ghostpol/ghost.hpp"
#include "ghostpol/io/config.hpp"
#include "ghostpol/io/csv.hpp"
#include "ghostpol/optproj.hpp"

using namespace ghostpol;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;  // stdout and stderr together
};

Run run_cli(const std::string& args) {
    const std::string cmd = std::string(GHOSTPOL_CLI_PATH) + " " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("ghostpol_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<std::string>> table(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) rows.push_back(io::split_csv_line(line));
    return rows;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("usage and configuration errors", "[cli]") {
    const auto d = scratch("errors");
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("sweep").code == 2);
    CHECK(run_cli("sweep --config " + q(d / "absent.json")).code == 2);
    CHECK(run_cli("--help").code == 0);

    const auto bad = write_file(d / "bad.json", R"({"grid": {"bogus": 1}})");
    auto r = run_cli("sweep --config " + q(bad));
    CHECK(r.code == 2);
    CHECK(r.out.find("/grid/bogus") != std::string::npos);

    const auto syntax = write_file(d / "syntax.json", "{\n\"seed\": 1,\n}\n");
    r = run_cli("sweep --config " + q(syntax));
    CHECK(r.code == 2);
    CHECK(r.out.find("syntax.json:3") != std::string::npos);

    const auto cond = write_file(d / "cond.json", R"({"coordinates": "conditional"})");
    r = run_cli("sweep --config " + q(cond) + " --out " + q(d / "o"));
    CHECK(r.code == 2);
    CHECK(r.out.find("/coordinates") != std::string::npos);

    const auto quiet = write_file(d / "quiet.json", R"({"noisy": false})");
    CHECK(run_cli("discriminate --config " + q(quiet) + " --out " + q(d / "o")).code == 2);
}

TEST_CASE("runtime errors exit with 1", "[cli]") {
    const auto d = scratch("runtime");
    write_file(d / "records.csv", "basis_a,basis_b,counts\nH,H,1\nH,V,2\n");
    const auto cfg = write_file(d / "cfg.json", R"({"tomography": {"records_csv": ")" + (d / "records.csv").string() + "\"}}");
    const auto r = run_cli("tomo --config " + q(cfg) + " --out " + q(d / "o"));
    CHECK(r.code == 1);
    CHECK(r.out.find("error") != std::string::npos);
}

TEST_CASE("sweep writes one table per family", "[cli]") {
    const auto d = scratch("sweep");
    const auto cfg = write_file(d / "cfg.json", R"({"families": [{"label": "QWP", "element": {"kind": "qwp"}}],
                                                     "noisy": false})");
    const auto r = run_cli("sweep --config " + q(cfg) + " --out " + q(d / "o"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("noiseless") != std::string::npos);
    CHECK(fs::exists(d / "o" / "curves.svg"));
    CHECK_FALSE(fs::exists(d / "o" / "runs_QWP.csv"));

    const auto rows = table(d / "o" / "curve_QWP.csv");
    REQUIRE(rows.size() == 181);
    CHECK(rows[0] == std::vector<std::string>{"theta_deg", "P1", "P2", "P3", "raw1", "raw2", "raw3"});

    std::vector<ghost::Elements> proj;
    for (const auto& p : optproj::reference_projectors()) proj.push_back(p.elements());
    const auto expect = ghost::sweep_family(qstate::bell_psi_plus(), ghost::SampleFamily::qwp(), ghost::angle_grid(),
                                            optproj::reference_probe().elements(), proj);
    for (std::size_t t = 0; t < 180; ++t) {
        REQUIRE(rows[t + 1].size() == 7);
        CHECK(std::stod(rows[t + 1][0]) == double(t));
        for (int n = 0; n < 3; ++n) CHECK(std::stod(rows[t + 1][4 + n]) == Approx(expect.samples[t].point(n)).margin(1e-15));
    }
}

TEST_CASE("noisy sweeps are reproducible", "[cli]") {
    const auto d = scratch("noisy");
    const auto cfg = write_file(d / "cfg.json", R"({"grid": {"step_deg": 5}, "n_runs": 3})");
    REQUIRE(run_cli("sweep --config " + q(cfg) + " --seed 11 --out " + q(d / "a")).code == 0);
    REQUIRE(run_cli("sweep --config " + q(cfg) + " --seed 11 --out " + q(d / "b")).code == 0);
    REQUIRE(run_cli("sweep --config " + q(cfg) + " --seed 12 --out " + q(d / "c")).code == 0);
    for (const char* f : {"curve_LP.csv", "curve_QWP.csv", "runs_LP.csv", "runs_QWP.csv", "curves.svg"}) {
        INFO(f);
        CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
    }
    CHECK(slurp(d / "a" / "runs_LP.csv") != slurp(d / "c" / "runs_LP.csv"));
    CHECK(table(d / "a" / "runs_QWP.csv").size() == 1 + 3 * 36 * 3);
}

TEST_CASE("discriminate reports distinguishable counts", "[cli]") {
    const auto d = scratch("discriminate");
    // Far-apart polarizer angles separate easily; 0 and 180 deg are the same element.
    const auto two = write_file(d / "two.json", R"({"families": [{"label": "LP", "element": {"kind": "polarizer"}}],
                                                     "grid": {"angles_deg": [0, 60]}})");
    auto r = run_cli("discriminate --config " + q(two) + " --out " + q(d / "two"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("family LP: 2 distinguishable") != std::string::npos);
    CHECK(r.out.find("total: 2 distinguishable") != std::string::npos);
    CHECK(slurp(d / "two" / "summary.txt") == r.out);
    CHECK(table(d / "two" / "report.csv").size() == 3);
    CHECK(fs::exists(d / "two" / "scatter.svg"));
    CHECK(fs::exists(d / "two" / "runs_LP.csv"));

    const auto one = write_file(d / "one.json", R"({"families": [{"label": "LP", "element": {"kind": "polarizer"}}],
                                                     "grid": {"angles_deg": [0, 180]}})");
    r = run_cli("discriminate --config " + q(one) + " --out " + q(d / "one"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("family LP: 1 distinguishable") != std::string::npos);
}

TEST_CASE("tomo reconstructs simulated and supplied records", "[cli]") {
    const auto d = scratch("tomo");
    const auto exact = write_file(d / "psi.json", R"({"noisy": false})");
    auto r = run_cli("tomo --config " + q(exact) + " --out " + q(d / "psi"));
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string key;
    double fidelity = 0;
    while (lines >> key)
        if (key == "fidelity") lines >> fidelity;
    CHECK(fidelity >= 0.9999);
    CHECK(r.out.find("converged true") != std::string::npos);
    CHECK(table(d / "psi" / "rho.csv").size() == 17);

    const auto mixed = write_file(d / "mixed.json", R"({"noisy": false, "state": {"kind": "werner", "p": 0}})");
    r = run_cli("tomo --config " + q(mixed) + " --out " + q(d / "mixed"));
    REQUIRE(r.code == 0);
    CHECK(r.out.find("concurrence 0.0000") != std::string::npos);

    // A 16-row table from elsewhere, here the records written by the first run.
    fs::copy_file(d / "psi" / "records.csv", d / "lab.csv");
    const auto ext = write_file(d / "ext.json", R"({"tomography": {"records_csv": ")" + (d / "lab.csv").string() + "\"}}");
    r = run_cli("tomo --config " + q(ext) + " --out " + q(d / "ext"));
    REQUIRE(r.code == 0);
    CHECK(slurp(d / "ext" / "rho.csv") == slurp(d / "psi" / "rho.csv"));
}

TEST_CASE("optimize output merges back into a config", "[cli]") {
    const auto d = scratch("optimize");
    const auto cfg = write_file(d / "cfg.json", R"({
        "families": [{"label": "LP", "element": {"kind": "polarizer"}}],
        "grid": {"step_deg": 10},
        "noisy": false,
        "optimize": {"free_parameters": ["probe.lp"], "restarts": 2, "max_evaluations": 200}})");
    auto r = run_cli("optimize --config " + q(cfg) + " --out " + q(d / "o"));
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("objective ", 0) == 0);
    REQUIRE(fs::exists(d / "o" / "best.json"));
    const auto trace = table(d / "o" / "trace.csv");
    REQUIRE(trace.size() >= 2);
    CHECK(trace[0] == std::vector<std::string>{"evaluation", "stage", "restart", "value", "best"});

    const auto merged = io::load_config(std::vector<fs::path>{d / "cfg.json", d / "o" / "best.json"});
    const auto oc = io::to_optimization(merged);
    CHECK(oc.probe.qwp_deg == optproj::reference_probe().qwp_deg);
    const auto ref = optproj::reference_projectors();
    CHECK(oc.projectors == std::vector<optproj::ProjectorParam>(ref.begin(), ref.end()));

    r = run_cli("sweep --config " + q(d / "cfg.json") + " --config " + q(d / "o" / "best.json") + " --out " + q(d / "s"));
    CHECK(r.code == 0);
}
