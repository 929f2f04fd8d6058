#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <regex>

#include "ghostpol/io/config.hpp"
#include "ghostpol/io/csv.hpp"
#include "ghostpol/io/svg.hpp"

using namespace ghostpol;
using namespace ghostpol::io;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string field_of(const std::string& text) {
    try {
        parse_config(parse_json_text(text));
    } catch (const ConfigError& e) {
        return e.field;
    }
    return "<no error>";
}

std::string message_of(const std::string& text) {
    try {
        parse_config(parse_json_text(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("ghostpol_io_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("empty config gives the defaults", "[io]") {
    const auto cfg = parse_config(json::object());
    CHECK(cfg == ExperimentConfig{});
    CHECK(cfg.families.size() == 2);
    CHECK(cfg.grid.build().size() == 180);
    CHECK(cfg.projectors.size() == 3);
    CHECK(cfg.n_runs == 8);
    CHECK(cfg.noisy);
}

TEST_CASE("full config parses", "[io]") {
    const auto cfg = parse_config(parse_json_text(R"({
        "state": {"kind": "werner", "p": 0.92},
        "families": [
            {"label": "LP", "element": {"kind": "polarizer"}},
            {"label": "PP", "element": {"kind": "partial_polarizer", "extinction": 3.7, "angle_deg": 10}},
            {"label": "M", "mueller": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}
        ],
        "grid": {"angles_deg": [0, 10, 20]},
        "probe": [{"kind": "qwp", "angle_deg": 62}, {"kind": "polarizer", "angle_deg": 90}],
        "projectors": [[{"kind": "polarizer", "angle_deg": 0}], [{"kind": "retarder", "retardance_rad": 1.0}, {"kind": "partial_polarizer", "extinction": "inf"}]],
        "coordinates": "conditional",
        "noisy": false,
        "count_model": {"pair_rate": 1e6, "drift_amplitude": 0},
        "n_runs": 5,
        "seed": 42,
        "out_dir": "results",
        "tomography": {"gradient_tol": 1e-9, "max_iterations": 500},
        "optimize": {"free_parameters": ["probe.qwp", "projector2.lp"], "objective": "mean_distance",
                     "mode": "sequential", "restarts": 4, "max_evaluations": 100}
    })"));
    CHECK(cfg.state.kind == StateSpec::Kind::werner);
    CHECK(cfg.state.werner_p == 0.92);
    REQUIRE(cfg.families.size() == 3);
    CHECK(std::get<polcalc::PolElement>(cfg.families[1].base).extinction == 3.7);
    CHECK(std::get<polcalc::PolElement>(cfg.families[1].base).theta_deg == 10);
    CHECK(std::holds_alternative<MuellerMatrix>(cfg.families[2].base));
    CHECK(cfg.grid.build() == std::vector<double>{0, 10, 20});
    CHECK(cfg.probe == optproj::ProjectorParam{62, 90}.elements());
    REQUIRE(cfg.projectors.size() == 2);
    CHECK(std::isinf(cfg.projectors[1][1].extinction));
    CHECK(cfg.coordinates == ghost::Coordinates::conditional);
    CHECK_FALSE(cfg.noisy);
    CHECK(cfg.count_model.pair_rate == 1e6);
    CHECK(cfg.count_model.drift_amplitude == 0);
    CHECK(cfg.count_model.eff_signal == countsim::CountModel{}.eff_signal);
    CHECK(cfg.n_runs == 5);
    CHECK(cfg.seed == 42);
    CHECK(cfg.out_dir == "results");
    CHECK(cfg.tomography.mle.gradient_tol == 1e-9);
    CHECK(cfg.tomography.mle.max_iterations == 500);
    CHECK(cfg.optimize.free_parameters == std::vector<std::string>{"probe.qwp", "projector2.lp"});
    CHECK(cfg.optimize.objective == optproj::ObjectiveKind::mean_distance);
    CHECK(cfg.optimize.mode == optproj::SearchMode::sequential);
    CHECK(cfg.optimize.restarts == 4);
    CHECK(cfg.optimize.max_evaluations == 100);

    // Round trip through the writer.
    CHECK(parse_config(config_json(cfg)) == cfg);
    CHECK(parse_config(parse_json_text(config_json(cfg).dump(2))) == cfg);
}

TEST_CASE("round trip over generated configs", "[io][property]") {
    std::mt19937_64 g(83);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        ExperimentConfig cfg;
        cfg.state.kind = StateSpec::Kind(t % 3);
        cfg.state.werner_p = u(g);
        if (cfg.state.kind == StateSpec::Kind::explicit_matrix) {
            std::normal_distribution<double> n;
            Eigen::Matrix4cd a;
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) a(i, j) = {n(g), n(g)};
            Matrix4c r = a * a.adjoint();
            cfg.state.matrix = r / r.trace().real();
        }
        cfg.families = {ghost::SampleFamily::element("a", polcalc::PolElement::partial_polarizer(1 + 10 * u(g), 180 * u(g))),
                        ghost::SampleFamily::element("b", polcalc::PolElement::retarder(3 * u(g), 180 * u(g)))};
        cfg.grid.step_deg = 0.5 + u(g);
        cfg.grid.start_deg = 10 * u(g);
        if (t % 2) cfg.grid.angles_deg = {0.1 * t, 0.1 * t + u(g) + 0.01};
        cfg.probe = {polcalc::PolElement::qwp(180 * u(g)), polcalc::PolElement::polarizer(180 * u(g))};
        cfg.projectors = {{polcalc::PolElement::polarizer(180 * u(g))}, {polcalc::PolElement::qwp(180 * u(g))}};
        cfg.noisy = t % 2;
        cfg.count_model.pair_rate = 1e3 + 1e6 * u(g);
        cfg.count_model.drift_amplitude = 0.5 * u(g);
        cfg.n_runs = 2 + t % 7;
        cfg.seed = g();
        cfg.out_dir = "dir" + std::to_string(t);
        cfg.optimize.restarts = 1 + t % 5;
        cfg.optimize.free_parameters = {"projector1.qwp"};
        const auto back = parse_config(parse_json_text(config_json(cfg).dump()));
        CHECK(back == cfg);
    }
}

TEST_CASE("config errors name the field", "[io]") {
    CHECK(field_of(R"({"colour": 1})") == "/colour");
    CHECK(field_of(R"({"state": {"kind": "werner", "p": 0.5, "extra": 1}})") == "/state/extra");
    CHECK(field_of(R"({"state": {"kind": "werner"}})") == "/state/p");
    CHECK(field_of(R"({"state": {"kind": "werner", "p": 1.5}})") == "/state/p");
    CHECK(field_of(R"({"state": {"kind": "ghz"}})") == "/state/kind");
    CHECK(message_of(R"({"state": {"kind": "ghz"}})").find("bell_psi_plus") != std::string::npos);
    CHECK(field_of(R"({"families": [{"label": "x", "element": {"kind": "mirror"}}]})") == "/families/0/element/kind");
    CHECK(field_of(R"({"families": [{"label": "x", "element": {"kind": "polarizer", "angel_deg": 3}}]})") ==
          "/families/0/element/angel_deg");
    CHECK(field_of(R"({"families": [{"label": "x"}]})") == "/families/0");
    CHECK(field_of(R"({"families": []})") == "/families");
    CHECK(field_of(R"({"families": [{"label": "x", "mueller": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,-1]]}]})") ==
          "/families/0/mueller");
    CHECK(field_of(R"({"families": [{"label": "x", "mueller": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0]]}]})") ==
          "/families/0/mueller/3");
    CHECK(field_of(R"({"families": [{"label": "x", "element": {"kind": "partial_polarizer", "extinction": 0.5}}]})") ==
          "/families/0/element");
    CHECK(field_of(R"({"grid": {"step_deg": 0}})") == "/grid/step_deg");
    CHECK(field_of(R"({"grid": {"angles_deg": [10, 5]}})") == "/grid/angles_deg");
    CHECK(field_of(R"({"grid": {"angles_deg": [0, "x"]}})") == "/grid/angles_deg/1");
    CHECK(field_of(R"({"probe": [{"kind": "qwp"}, 5]})") == "/probe/1");
    CHECK(field_of(R"({"projectors": []})") == "/projectors");
    CHECK(field_of(R"({"projectors": [[{"kind": "polarizer", "angle_deg": "ten"}]]})") == "/projectors/0/0/angle_deg");
    CHECK(field_of(R"({"coordinates": "polar"})") == "/coordinates");
    CHECK(field_of(R"({"noisy": "yes"})") == "/noisy");
    CHECK(field_of(R"({"count_model": {"eff_signal": 2}})") == "/count_model");
    CHECK(field_of(R"({"count_model": {"rate": 2}})") == "/count_model/rate");
    CHECK(field_of(R"({"n_runs": 1})") == "/n_runs");
    CHECK(field_of(R"({"n_runs": 2.5})") == "/n_runs");
    CHECK(field_of(R"({"seed": -1})") == "/seed");
    CHECK(field_of(R"({"tomography": {"records": "x.csv"}})") == "/tomography/records");
    CHECK(field_of(R"({"optimize": {"free_parameters": ["probe.tilt"]}})") == "/optimize/free_parameters/0");
    CHECK(field_of(R"({"optimize": {"restarts": 0}})") == "/optimize/restarts");
    CHECK(field_of(R"({"optimize": {"mode": "greedy"}})") == "/optimize/mode");
    CHECK(field_of(R"({"state": {"kind": "explicit"}})") == "/state/matrix");
    CHECK(field_of(R"({"state": {"kind": "explicit", "matrix": [[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,-1]]}})") ==
          "/state/matrix");
    CHECK(field_of(R"([1, 2])") == "/");
}

TEST_CASE("syntax errors report the line", "[io]") {
    const std::string text = "{\n  \"seed\": 1,\n  \"noisy\": tru\n}\n";
    try {
        parse_json_text(text, "broken.json");
        FAIL("expected a syntax error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("broken.json:3:") != std::string::npos);
    }
}

TEST_CASE("explicit state from a file and merged configs", "[io]") {
    const fs::path src(GHOSTPOL_SOURCE_DIR);
    const auto dir = scratch_dir("merge");
    fs::copy_file(src / "configs" / "lab_state.json", dir / "lab_state.json");
    {
        std::ofstream(dir / "base.json") << R"({"state": {"kind": "explicit", "file": "lab_state.json"}, "seed": 3, "n_runs": 4})";
        std::ofstream(dir / "patch.json") << R"({"seed": 9, "noisy": false})";
    }
    const auto cfg = load_config(std::vector<fs::path>{dir / "base.json", dir / "patch.json"});
    CHECK(cfg.state.kind == StateSpec::Kind::explicit_matrix);
    CHECK(cfg.seed == 9);
    CHECK(cfg.n_runs == 4);
    CHECK_FALSE(cfg.noisy);
    const auto m = qstate::metrics(cfg.state.build());
    CHECK(m.concurrence == Approx(0.88).margin(0.005));

    CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("settings fragment round trip", "[io]") {
    const optproj::ProjectorParam probe{12.5, 101, 3.7, optproj::ElementOrder::lp_then_qwp};
    const std::vector<optproj::ProjectorParam> proj{{170, 7.5}, {18, 110}};
    std::vector<ghost::Elements> pe;
    for (const auto& p : proj) pe.push_back(p.elements());
    const json frag = settings_fragment(probe.elements(), pe);

    json base = config_json(ExperimentConfig{});
    base.merge_patch(parse_json_text(frag.dump(2)));
    const auto cfg = parse_config(base);
    CHECK(cfg.probe == probe.elements());
    CHECK(cfg.projectors == pe);
    const auto oc = to_optimization(cfg);
    CHECK(oc.probe == probe);
    CHECK(oc.projectors == proj);
    CHECK(oc.dimension == 2);

    ExperimentConfig bad;
    bad.probe = {polcalc::PolElement::polarizer(0)};
    try {
        to_optimization(bad);
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.field == "/probe");
    }
}

TEST_CASE("csv helpers", "[io]") {
    CHECK(num(0.1) == "0.1");
    CHECK(num(1e-20) == "1e-20");
    CHECK(std::stod(num(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(num(std::int64_t{42}) == "42");
    CHECK(split_csv_line("a,\"b,c\",\"d\"\"e\"") == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(split_csv_line("x,,y\r") == std::vector<std::string>{"x", "", "y"});
    std::ostringstream os;
    CsvWriter(os).row({"plain", "with,comma", "q\"uote"});
    CHECK(os.str() == "plain,\"with,comma\",\"q\"\"uote\"\n");
    CHECK(split_csv_line(os.str().substr(0, os.str().size() - 1)) ==
          std::vector<std::string>{"plain", "with,comma", "q\"uote"});
}

TEST_CASE("curve and run tables", "[io]") {
    const auto psi = qstate::bell_psi_plus();
    std::vector<ghost::Elements> proj;
    for (const auto& p : optproj::reference_projectors()) proj.push_back(p.elements());
    const auto raw = ghost::sweep_family(psi, ghost::SampleFamily::qwp(), ghost::angle_grid(), optproj::reference_probe().elements(), proj);
    const auto norm = ghost::normalize_dataset({raw});
    std::ostringstream os;
    write_curve_csv(os, norm[0], raw);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "theta_deg,P1,P2,P3,raw1,raw2,raw3");
    int rows = 0;
    while (std::getline(is, line)) {
        const auto f = split_csv_line(line);
        REQUIRE(f.size() == 7);
        CHECK(std::stod(f[0]) == rows);
        for (int k = 0; k < 3; ++k) {
            CHECK(std::stod(f[1 + k]) == norm[0].samples[rows].point(k));
            CHECK(std::stod(f[4 + k]) == raw.samples[rows].point(k));
        }
        ++rows;
    }
    CHECK(rows == 180);

    const auto runs = countsim::simulate_runs(raw, countsim::CountModel{}, 3, 1);
    const auto corrected = countsim::correct_counts(runs, countsim::CountModel{});
    std::ostringstream ro;
    write_runs_csv(ro, runs, corrected);
    std::istringstream ri(ro.str());
    std::getline(ri, line);
    CHECK(line == "run,theta_deg,projector_index,raw,corrected");
    rows = 0;
    while (std::getline(ri, line)) ++rows;
    CHECK(rows == 3 * 180 * 3);
}

TEST_CASE("record and density tables", "[io]") {
    const auto rec = tomo::exact_records(qstate::werner_mix(0.7), 1234.5);
    std::ostringstream os;
    write_records_csv(os, rec);
    std::istringstream is(os.str());
    const auto back = read_records_csv(is);
    REQUIRE(back.size() == 16);
    for (std::size_t i = 0; i < 16; ++i) {
        CHECK(back[i].pair == rec[i].pair);
        CHECK(back[i].counts == rec[i].counts);
    }

    std::istringstream padded(" basis_a , basis_b , counts \r\nH,V,10\n\nV , H , 12.5\n");
    const auto p = read_records_csv(padded);
    REQUIRE(p.size() == 2);
    CHECK(p[1].counts == 12.5);

    auto error_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_records_csv(in, "lab.csv");
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string("<no error>");
    };
    CHECK(error_of("a,b,c\n").find("lab.csv:1:") != std::string::npos);
    CHECK(error_of("basis_a,basis_b,counts\nH,V\n").find("lab.csv:2:") != std::string::npos);
    CHECK(error_of("basis_a,basis_b,counts\nH,V,1\nH,X,3\n").find("lab.csv:3:") != std::string::npos);
    CHECK(error_of("basis_a,basis_b,counts\nH,V,many\n").find("lab.csv:2:") != std::string::npos);

    std::ostringstream d;
    write_density_csv(d, qstate::bell_psi_plus().matrix());
    const std::string text = d.str();
    CHECK(text.rfind("row,col,real,imag\n", 0) == 0);
    CHECK(count_of(text, "\n") == 17);
    CHECK(text.find("1,2,0.5,0\n") != std::string::npos);
}

TEST_CASE("report table", "[io]") {
    discern::FamilySelection sel;
    sel.label = "LP";
    sel.theta_deg = {0, 1, 2};
    sel.kept = {0, 2};
    discern::SampleStats s;
    s.mean = Eigen::Vector2d(0.5, 0.25);
    s.std = Eigen::Vector2d(0.1, 0.2);
    s.ci95 = Eigen::Vector2d(0.01, 0.02);
    s.n_runs = 8;
    std::ostringstream os;
    write_report_csv(os, {sel}, {{s, s, s}});
    CHECK(os.str().rfind("family,theta_deg,kept,mean1,std1,ci95_1,mean2,std2,ci95_2\n", 0) == 0);
    CHECK(os.str().find("LP,1,0,0.5,0.1,0.01,0.25,0.2,0.02\n") != std::string::npos);
    CHECK(os.str().find("LP,2,1,") != std::string::npos);
}

TEST_CASE("svg output", "[io]") {
    ghost::ResponseCurve a{"LP", {}}, b{"Q<W>P", {}};
    for (int t = 0; t < 10; ++t) {
        a.samples.push_back({double(t), Eigen::Vector3d(0.1 * t, 0.5, 1.0 - 0.1 * t)});
        b.samples.push_back({double(t), Eigen::Vector3d(0.3, 0.05 * t, 0.2)});
    }
    std::ostringstream os;
    write_curves_svg(os, {a, b}, "curves & more");
    const std::string s = os.str();
    CHECK(s.rfind("<svg", 0) == 0);
    CHECK(s.find("</svg>") != std::string::npos);
    CHECK(count_of(s, "<polyline class=\"curve\"") == 6);
    CHECK(s.find("Q&lt;W&gt;P") != std::string::npos);
    CHECK(s.find("curves &amp; more") != std::string::npos);

    auto selection = [](const std::string& label, int n, std::vector<std::size_t> kept, int dim) {
        discern::FamilySelection f;
        f.label = label;
        for (int i = 0; i < n; ++i) {
            f.theta_deg.push_back(i);
            f.regions.push_back({Eigen::VectorXd::Constant(dim, 0.1 * i), Eigen::VectorXd::Constant(dim, 0.01)});
        }
        f.kept = std::move(kept);
        return f;
    };
    std::ostringstream s3;
    write_scatter_svg(s3, {selection("LP", 5, {0, 2, 4}, 3), selection("QWP", 4, {1}, 3)}, "regions");
    CHECK(count_of(s3.str(), "<ellipse class=\"region") == 3 * 9);
    std::ostringstream s2;
    write_scatter_svg(s2, {selection("LP", 5, {0, 2, 4}, 2)}, "regions");
    CHECK(count_of(s2.str(), "<ellipse class=\"region") == 5);
}
