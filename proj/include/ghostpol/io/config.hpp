#pragma once

/**
 * @file config.hpp
 * @brief JSON experiment configuration. Unknown keys are errors; every error
 *        names the offending field as a JSON pointer (or the line, for syntax
 *        errors). See docs/config.md for the schema.
 */

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghostpol/countsim.hpp"
#include "ghostpol/ghost.hpp"
#include "ghostpol/optproj.hpp"
#include "ghostpol/tomo.hpp"

namespace ghostpol::io {

using nlohmann::json;

struct ConfigError : Error {
    std::string field;
    ConfigError(std::string field_, const std::string& what)
        : Error(field_.empty() ? what : field_ + ": " + what), field(std::move(field_)) {}
};

// ---------------------------------------------------------------------------
// Schema types

struct StateSpec {
    enum class Kind { bell_psi_plus, werner, explicit_matrix } kind = Kind::bell_psi_plus;
    double werner_p = 1.0;
    Matrix4c matrix = Matrix4c::Identity() / 4.0;

    qstate::TwoQubitDensity build() const {
        switch (kind) {
            case Kind::bell_psi_plus: return qstate::bell_psi_plus();
            case Kind::werner: return qstate::werner_mix(werner_p);
            case Kind::explicit_matrix: return qstate::TwoQubitDensity(matrix);
        }
        return {};
    }
    friend bool operator==(const StateSpec& a, const StateSpec& b) {
        // Only the fields the kind uses take part.
        if (a.kind != b.kind) return false;
        if (a.kind == Kind::werner) return a.werner_p == b.werner_p;
        if (a.kind == Kind::explicit_matrix) return a.matrix == b.matrix;
        return true;
    }
};

struct GridSpec {
    double start_deg = 0.0;
    double stop_deg = 180.0;
    double step_deg = 1.0;
    std::vector<double> angles_deg;  ///< overrides the range when non-empty

    std::vector<double> build() const {
        return angles_deg.empty() ? ghost::angle_grid(step_deg, start_deg, stop_deg) : angles_deg;
    }
    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct TomoSpec {
    std::string records_csv;  ///< measured records; empty = simulate from the state
    tomo::MleOptions mle;
    friend bool operator==(const TomoSpec& a, const TomoSpec& b) {
        return a.records_csv == b.records_csv && a.mle.gradient_tol == b.mle.gradient_tol &&
               a.mle.max_iterations == b.mle.max_iterations && a.mle.init_mixing == b.mle.init_mixing;
    }
};

struct OptimizeSpec {
    std::vector<std::string> free_parameters;
    optproj::ObjectiveKind objective = optproj::ObjectiveKind::min_distance;
    optproj::SearchMode mode = optproj::SearchMode::joint;
    std::size_t restarts = 16;
    int max_evaluations = 8000;
    friend bool operator==(const OptimizeSpec&, const OptimizeSpec&) = default;
};

struct ExperimentConfig {
    StateSpec state;
    std::vector<ghost::SampleFamily> families{ghost::SampleFamily::lp(), ghost::SampleFamily::qwp()};
    GridSpec grid;
    ghost::Elements probe{optproj::reference_probe().elements()};
    std::vector<ghost::Elements> projectors{optproj::reference_projectors(3)[0].elements(),
                                            optproj::reference_projectors(3)[1].elements(),
                                            optproj::reference_projectors(3)[2].elements()};
    ghost::Coordinates coordinates = ghost::Coordinates::joint;
    bool noisy = true;
    countsim::CountModel count_model;
    std::size_t n_runs = 8;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    TomoSpec tomography;
    OptimizeSpec optimize;

    friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
        auto fam_eq = [](const ghost::SampleFamily& x, const ghost::SampleFamily& y) {
            if (x.label != y.label || x.base.index() != y.base.index()) return false;
            if (const auto* e = std::get_if<polcalc::PolElement>(&x.base)) return *e == std::get<polcalc::PolElement>(y.base);
            return std::get<MuellerMatrix>(x.base) == std::get<MuellerMatrix>(y.base);
        };
        if (a.families.size() != b.families.size()) return false;
        for (std::size_t i = 0; i < a.families.size(); ++i)
            if (!fam_eq(a.families[i], b.families[i])) return false;
        const auto& m = a.count_model;
        const auto& n = b.count_model;
        const bool model_eq = m.pair_rate == n.pair_rate && m.integration_time == n.integration_time &&
                              m.eff_signal == n.eff_signal && m.eff_idler == n.eff_idler &&
                              m.coincidence_window == n.coincidence_window &&
                              m.singles_background == n.singles_background && m.drift_amplitude == n.drift_amplitude;
        return a.state == b.state && a.grid == b.grid && a.probe == b.probe && a.projectors == b.projectors &&
               a.coordinates == b.coordinates && a.noisy == b.noisy && model_eq && a.n_runs == b.n_runs &&
               a.seed == b.seed && a.out_dir == b.out_dir && a.tomography == b.tomography &&
               a.optimize == b.optimize;
    }
};

// ---------------------------------------------------------------------------
// Reading

namespace detail {

inline std::string child(const std::string& ptr, const std::string& key) {
    std::string k;
    for (char c : key) k += c == '~' ? "~0" : c == '/' ? "~1" : std::string(1, c);
    return ptr + "/" + k;
}
inline std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

/// Object view that rejects keys nobody asked about.
class Obj {
public:
    Obj(const json& j, std::string ptr) : j_(j), ptr_(std::move(ptr)) {
        if (!j.is_object()) throw ConfigError(where(), "expected an object");
    }
    ~Obj() = default;

    bool has(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }
    const json& at(const std::string& k) {
        seen_.insert(k);
        if (!j_.contains(k)) throw ConfigError(child(ptr_, k), "missing required field");
        return j_.at(k);
    }
    std::string path(const std::string& k) const { return child(ptr_, k); }
    std::string where() const { return ptr_.empty() ? "/" : ptr_; }

    /// Call after reading every known key.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(child(ptr_, it.key()), "unknown key");
    }

private:
    const json& j_;
    std::string ptr_;
    std::set<std::string> seen_;
};

inline double number(const json& j, const std::string& ptr) {
    if (!j.is_number()) throw ConfigError(ptr, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
    return v;
}

inline double number_or_inf(const json& j, const std::string& ptr) {
    if (j.is_string() && (j == "inf" || j == "infinity")) return std::numeric_limits<double>::infinity();
    return number(j, ptr);
}

inline std::uint64_t unsigned_int(const json& j, const std::string& ptr) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        throw ConfigError(ptr, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

inline std::string string(const json& j, const std::string& ptr) {
    if (!j.is_string()) throw ConfigError(ptr, "expected a string");
    return j.get<std::string>();
}

inline bool boolean(const json& j, const std::string& ptr) {
    if (!j.is_boolean()) throw ConfigError(ptr, "expected true or false");
    return j.get<bool>();
}

inline const json& array(const json& j, const std::string& ptr) {
    if (!j.is_array()) throw ConfigError(ptr, "expected an array");
    return j;
}

template <class E>
E choice(const json& j, const std::string& ptr, std::initializer_list<std::pair<const char*, E>> options) {
    const std::string s = string(j, ptr);
    std::string names;
    for (const auto& [name, value] : options) {
        if (s == name) return value;
        names += names.empty() ? name : std::string(", ") + name;
    }
    throw ConfigError(ptr, "unknown value '" + s + "' (expected one of: " + names + ")");
}

inline cd complex_pair(const json& j, const std::string& ptr) {
    if (j.is_number()) return {number(j, ptr), 0.0};
    if (!j.is_array() || j.size() != 2) throw ConfigError(ptr, "expected [re, im]");
    return {number(j[0], child(ptr, 0)), number(j[1], child(ptr, 1))};
}

}  // namespace detail

inline polcalc::PolElement parse_element(const json& j, const std::string& ptr) {
    using polcalc::PolElement;
    detail::Obj o(j, ptr);
    const std::string kind = detail::string(o.at("kind"), o.path("kind"));
    const double angle = o.has("angle_deg") ? detail::number(o.at("angle_deg"), o.path("angle_deg")) : 0.0;
    PolElement e;
    try {
        if (kind == "polarizer") {
            e = PolElement::polarizer(angle);
        } else if (kind == "partial_polarizer") {
            e = PolElement::partial_polarizer(detail::number_or_inf(o.at("extinction"), o.path("extinction")), angle);
        } else if (kind == "retarder") {
            e = PolElement::retarder(detail::number(o.at("retardance_rad"), o.path("retardance_rad")), angle);
        } else if (kind == "qwp") {
            e = PolElement::qwp(angle);
        } else {
            throw ConfigError(o.path("kind"),
                              "unknown element kind '" + kind + "' (expected polarizer, partial_polarizer, retarder, qwp)");
        }
    } catch (const DomainError& err) {
        throw ConfigError(ptr, err.what());
    }
    o.finish();
    return e;
}

inline ghost::Elements parse_elements(const json& j, const std::string& ptr) {
    detail::array(j, ptr);
    ghost::Elements out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_element(j[i], detail::child(ptr, i)));
    return out;
}

inline MuellerMatrix parse_mueller(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.size() != 4) throw ConfigError(ptr, "expected a 4x4 array");
    MuellerMatrix m;
    for (std::size_t r = 0; r < 4; ++r) {
        const auto rp = detail::child(ptr, r);
        if (!j[r].is_array() || j[r].size() != 4) throw ConfigError(rp, "expected 4 numbers");
        for (std::size_t c = 0; c < 4; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = detail::number(j[r][c], detail::child(rp, c));
    }
    return m;
}

inline Matrix4c parse_density(const json& j, const std::string& ptr) {
    if (!j.is_array() || j.size() != 4) throw ConfigError(ptr, "expected a 4x4 array of [re, im] pairs");
    Matrix4c m;
    for (std::size_t r = 0; r < 4; ++r) {
        const auto rp = detail::child(ptr, r);
        if (!j[r].is_array() || j[r].size() != 4) throw ConfigError(rp, "expected 4 entries");
        for (std::size_t c = 0; c < 4; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = detail::complex_pair(j[r][c], detail::child(rp, c));
    }
    return m;
}

/// Parses JSON text, turning syntax errors into line-numbered diagnostics.
inline json parse_json_text(const std::string& text, const std::string& source = "config") {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t end = std::min<std::size_t>(e.byte, text.size());
        for (std::size_t i = 0; i + 1 < end; ++i)
            if (text[i] == '\n') ++line;
        throw ConfigError("", source + ":" + std::to_string(line) + ": syntax error: " + e.what());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path.string());
}

/// Builds a config from a JSON document. Relative file references (explicit
/// state files, record CSVs) are resolved against `base_dir`.
inline ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir = {}) {
    using detail::Obj;
    ExperimentConfig cfg;
    Obj root(j, "");

    if (root.has("state")) {
        Obj s(root.at("state"), "/state");
        cfg.state.kind = detail::choice<StateSpec::Kind>(s.at("kind"), s.path("kind"),
                                                         {{"bell_psi_plus", StateSpec::Kind::bell_psi_plus},
                                                          {"werner", StateSpec::Kind::werner},
                                                          {"explicit", StateSpec::Kind::explicit_matrix}});
        if (cfg.state.kind == StateSpec::Kind::werner) {
            cfg.state.werner_p = detail::number(s.at("p"), s.path("p"));
            if (cfg.state.werner_p < 0.0 || cfg.state.werner_p > 1.0) throw ConfigError(s.path("p"), "must lie in [0, 1]");
        }
        if (cfg.state.kind == StateSpec::Kind::explicit_matrix) {
            if (s.has("matrix")) {
                cfg.state.matrix = parse_density(s.at("matrix"), s.path("matrix"));
            } else if (s.has("file")) {
                auto p = std::filesystem::path(detail::string(s.at("file"), s.path("file")));
                if (p.is_relative()) p = base_dir / p;
                cfg.state.matrix = parse_density(read_json_file(p), p.string());
            } else {
                throw ConfigError(s.path("matrix"), "explicit state needs 'matrix' or 'file'");
            }
            try {
                (void)qstate::TwoQubitDensity(cfg.state.matrix);
            } catch (const DomainError& e) {
                throw ConfigError(s.path("matrix"), e.what());
            }
        }
        s.finish();
    }

    if (root.has("families")) {
        const auto& arr = detail::array(root.at("families"), "/families");
        if (arr.empty()) throw ConfigError("/families", "at least one sample family is required");
        cfg.families.clear();
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Obj f(arr[i], detail::child("/families", i));
            const std::string label = detail::string(f.at("label"), f.path("label"));
            if (f.has("element") == f.has("mueller"))
                throw ConfigError(f.where(), "a family needs exactly one of 'element' or 'mueller'");
            if (f.has("element")) {
                cfg.families.push_back(ghost::SampleFamily::element(label, parse_element(f.at("element"), f.path("element"))));
            } else {
                const MuellerMatrix m = parse_mueller(f.at("mueller"), f.path("mueller"));
                if (!polcalc::mueller_to_choi(m).physical)
                    throw ConfigError(f.path("mueller"), "not a physical Mueller matrix (Choi matrix has a negative eigenvalue)");
                cfg.families.push_back(ghost::SampleFamily::mueller(label, m));
            }
            f.finish();
        }
    }

    if (root.has("grid")) {
        Obj g(root.at("grid"), "/grid");
        if (g.has("start_deg")) cfg.grid.start_deg = detail::number(g.at("start_deg"), g.path("start_deg"));
        if (g.has("stop_deg")) cfg.grid.stop_deg = detail::number(g.at("stop_deg"), g.path("stop_deg"));
        if (g.has("step_deg")) cfg.grid.step_deg = detail::number(g.at("step_deg"), g.path("step_deg"));
        if (g.has("angles_deg")) {
            const auto& a = detail::array(g.at("angles_deg"), g.path("angles_deg"));
            for (std::size_t i = 0; i < a.size(); ++i)
                cfg.grid.angles_deg.push_back(detail::number(a[i], detail::child(g.path("angles_deg"), i)));
            if (cfg.grid.angles_deg.empty()) throw ConfigError(g.path("angles_deg"), "must not be empty");
            for (std::size_t i = 1; i < cfg.grid.angles_deg.size(); ++i)
                if (!(cfg.grid.angles_deg[i] > cfg.grid.angles_deg[i - 1]))
                    throw ConfigError(g.path("angles_deg"), "angles must be strictly increasing");
        }
        if (!(cfg.grid.step_deg > 0.0)) throw ConfigError(g.path("step_deg"), "must be positive");
        if (cfg.grid.angles_deg.empty() && !(cfg.grid.stop_deg > cfg.grid.start_deg))
            throw ConfigError(g.path("stop_deg"), "must exceed start_deg");
        g.finish();
    }

    if (root.has("probe")) cfg.probe = parse_elements(root.at("probe"), "/probe");
    if (root.has("projectors")) {
        const auto& arr = detail::array(root.at("projectors"), "/projectors");
        if (arr.empty()) throw ConfigError("/projectors", "at least one idler projector is required");
        cfg.projectors.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
            cfg.projectors.push_back(parse_elements(arr[i], detail::child("/projectors", i)));
    }
    if (root.has("coordinates"))
        cfg.coordinates = detail::choice<ghost::Coordinates>(
            root.at("coordinates"), "/coordinates",
            {{"joint", ghost::Coordinates::joint}, {"conditional", ghost::Coordinates::conditional}});
    if (root.has("noisy")) cfg.noisy = detail::boolean(root.at("noisy"), "/noisy");

    if (root.has("count_model")) {
        Obj m(root.at("count_model"), "/count_model");
        auto& cm = cfg.count_model;
        auto opt = [&](const char* key, double& field) {
            if (m.has(key)) field = detail::number(m.at(key), m.path(key));
        };
        opt("pair_rate", cm.pair_rate);
        opt("integration_time", cm.integration_time);
        opt("eff_signal", cm.eff_signal);
        opt("eff_idler", cm.eff_idler);
        opt("coincidence_window", cm.coincidence_window);
        opt("singles_background", cm.singles_background);
        opt("drift_amplitude", cm.drift_amplitude);
        m.finish();
        try {
            cm.validate();
        } catch (const DomainError& e) {
            throw ConfigError("/count_model", e.what());
        }
    }

    if (root.has("n_runs")) {
        cfg.n_runs = detail::unsigned_int(root.at("n_runs"), "/n_runs");
        if (cfg.n_runs < 2) throw ConfigError("/n_runs", "at least 2 runs are required");
    }
    if (root.has("seed")) cfg.seed = detail::unsigned_int(root.at("seed"), "/seed");
    if (root.has("out_dir")) cfg.out_dir = detail::string(root.at("out_dir"), "/out_dir");

    if (root.has("tomography")) {
        Obj t(root.at("tomography"), "/tomography");
        if (t.has("records_csv")) {
            auto p = std::filesystem::path(detail::string(t.at("records_csv"), t.path("records_csv")));
            cfg.tomography.records_csv = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
        }
        if (t.has("gradient_tol")) cfg.tomography.mle.gradient_tol = detail::number(t.at("gradient_tol"), t.path("gradient_tol"));
        if (t.has("max_iterations"))
            cfg.tomography.mle.max_iterations = static_cast<int>(detail::unsigned_int(t.at("max_iterations"), t.path("max_iterations")));
        if (t.has("init_mixing")) cfg.tomography.mle.init_mixing = detail::number(t.at("init_mixing"), t.path("init_mixing"));
        t.finish();
    }

    if (root.has("optimize")) {
        Obj o(root.at("optimize"), "/optimize");
        auto& op = cfg.optimize;
        if (o.has("free_parameters")) {
            const auto& a = detail::array(o.at("free_parameters"), o.path("free_parameters"));
            const auto slots = optproj::all_slots(cfg.projectors.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const auto ptr = detail::child(o.path("free_parameters"), i);
                const std::string name = detail::string(a[i], ptr);
                if (std::none_of(slots.begin(), slots.end(), [&](const auto& s) { return s.name == name; }))
                    throw ConfigError(ptr, "unknown parameter '" + name + "'");
                op.free_parameters.push_back(name);
            }
        }
        if (o.has("objective"))
            op.objective = detail::choice<optproj::ObjectiveKind>(
                o.at("objective"), o.path("objective"),
                {{"min_distance", optproj::ObjectiveKind::min_distance},
                 {"mean_distance", optproj::ObjectiveKind::mean_distance},
                 {"min_ci_normalized", optproj::ObjectiveKind::min_ci_normalized}});
        if (o.has("mode"))
            op.mode = detail::choice<optproj::SearchMode>(
                o.at("mode"), o.path("mode"),
                {{"joint", optproj::SearchMode::joint}, {"sequential", optproj::SearchMode::sequential}});
        if (o.has("restarts")) {
            op.restarts = detail::unsigned_int(o.at("restarts"), o.path("restarts"));
            if (op.restarts < 1) throw ConfigError(o.path("restarts"), "must be >= 1");
        }
        if (o.has("max_evaluations")) {
            op.max_evaluations = static_cast<int>(detail::unsigned_int(o.at("max_evaluations"), o.path("max_evaluations")));
            if (op.max_evaluations < 1) throw ConfigError(o.path("max_evaluations"), "must be >= 1");
        }
        o.finish();
    }

    root.finish();
    return cfg;
}

/// Reads and merges config files in order (later files patch earlier ones,
/// RFC 7386), then parses the result.
inline ExperimentConfig load_config(const std::vector<std::filesystem::path>& paths) {
    json merged = json::object();
    std::filesystem::path base;
    for (const auto& p : paths) {
        merged.merge_patch(read_json_file(p));
        base = p.parent_path();
    }
    return parse_config(merged, base);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    return load_config(std::vector<std::filesystem::path>{path});
}

// ---------------------------------------------------------------------------
// Writing

inline json element_json(const polcalc::PolElement& e) {
    using polcalc::ElementKind;
    json j;
    switch (e.kind) {
        case ElementKind::ideal_polarizer: j["kind"] = "polarizer"; break;
        case ElementKind::partial_polarizer:
            j["kind"] = "partial_polarizer";
            if (std::isinf(e.extinction))
                j["extinction"] = "inf";
            else
                j["extinction"] = e.extinction;
            break;
        case ElementKind::retarder:
            j["kind"] = "retarder";
            j["retardance_rad"] = e.retardance_rad;
            break;
    }
    j["angle_deg"] = e.theta_deg;
    return j;
}

inline json elements_json(const ghost::Elements& es) {
    json a = json::array();
    for (const auto& e : es) a.push_back(element_json(e));
    return a;
}

inline json density_json(const Matrix4c& m) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
        rows.push_back(row);
    }
    return rows;
}

/// Fragment carrying probe and projector settings; merge it over a config
/// (e.g. pass it as a second --config) to simulate with these settings.
inline json settings_fragment(const ghost::Elements& probe, const std::vector<ghost::Elements>& projectors) {
    json j;
    j["probe"] = elements_json(probe);
    json p = json::array();
    for (const auto& e : projectors) p.push_back(elements_json(e));
    j["projectors"] = p;
    return j;
}

inline json config_json(const ExperimentConfig& cfg) {
    json j;
    switch (cfg.state.kind) {
        case StateSpec::Kind::bell_psi_plus: j["state"] = {{"kind", "bell_psi_plus"}}; break;
        case StateSpec::Kind::werner: j["state"] = {{"kind", "werner"}, {"p", cfg.state.werner_p}}; break;
        case StateSpec::Kind::explicit_matrix:
            j["state"] = {{"kind", "explicit"}, {"matrix", density_json(cfg.state.matrix)}};
            break;
    }
    json fams = json::array();
    for (const auto& f : cfg.families) {
        json fj{{"label", f.label}};
        if (const auto* e = std::get_if<polcalc::PolElement>(&f.base)) {
            fj["element"] = element_json(*e);
        } else {
            const auto& m = std::get<MuellerMatrix>(f.base);
            json rows = json::array();
            for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
            fj["mueller"] = rows;
        }
        fams.push_back(fj);
    }
    j["families"] = fams;
    j["grid"] = {{"start_deg", cfg.grid.start_deg}, {"stop_deg", cfg.grid.stop_deg}, {"step_deg", cfg.grid.step_deg}};
    if (!cfg.grid.angles_deg.empty()) j["grid"]["angles_deg"] = cfg.grid.angles_deg;
    j.update(settings_fragment(cfg.probe, cfg.projectors));
    j["coordinates"] = cfg.coordinates == ghost::Coordinates::joint ? "joint" : "conditional";
    j["noisy"] = cfg.noisy;
    const auto& m = cfg.count_model;
    j["count_model"] = {{"pair_rate", m.pair_rate},
                        {"integration_time", m.integration_time},
                        {"eff_signal", m.eff_signal},
                        {"eff_idler", m.eff_idler},
                        {"coincidence_window", m.coincidence_window},
                        {"singles_background", m.singles_background},
                        {"drift_amplitude", m.drift_amplitude}};
    j["n_runs"] = cfg.n_runs;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["tomography"] = {{"gradient_tol", cfg.tomography.mle.gradient_tol},
                       {"max_iterations", cfg.tomography.mle.max_iterations},
                       {"init_mixing", cfg.tomography.mle.init_mixing}};
    if (!cfg.tomography.records_csv.empty()) j["tomography"]["records_csv"] = cfg.tomography.records_csv;
    const char* objective = cfg.optimize.objective == optproj::ObjectiveKind::min_distance    ? "min_distance"
                            : cfg.optimize.objective == optproj::ObjectiveKind::mean_distance ? "mean_distance"
                                                                                              : "min_ci_normalized";
    j["optimize"] = {{"free_parameters", cfg.optimize.free_parameters},
                     {"objective", objective},
                     {"mode", cfg.optimize.mode == optproj::SearchMode::joint ? "joint" : "sequential"},
                     {"restarts", cfg.optimize.restarts},
                     {"max_evaluations", cfg.optimize.max_evaluations}};
    return j;
}

// ---------------------------------------------------------------------------
// Bridging to the optimizer

/// Reads a QWP + polarizer pair (either order) back into a ProjectorParam.
inline optproj::ProjectorParam to_projector_param(const ghost::Elements& es, const std::string& ptr) {
    using polcalc::ElementKind;
    auto is_qwp = [](const polcalc::PolElement& e) {
        return e.kind == ElementKind::retarder && std::abs(e.retardance_rad - kPi / 2) < 1e-12;
    };
    auto is_pol = [](const polcalc::PolElement& e) { return e.kind != ElementKind::retarder; };
    if (es.size() != 2 || !((is_qwp(es[0]) && is_pol(es[1])) || (is_pol(es[0]) && is_qwp(es[1]))))
        throw ConfigError(ptr, "the optimizer needs exactly one quarter-wave plate and one polarizer");
    optproj::ProjectorParam p;
    const bool qwp_first = is_qwp(es[0]);
    const auto& q = qwp_first ? es[0] : es[1];
    const auto& l = qwp_first ? es[1] : es[0];
    p.qwp_deg = q.theta_deg;
    p.lp_deg = l.theta_deg;
    p.extinction = l.kind == ElementKind::ideal_polarizer ? std::numeric_limits<double>::infinity() : l.extinction;
    p.order = qwp_first ? optproj::ElementOrder::qwp_then_lp : optproj::ElementOrder::lp_then_qwp;
    return p;
}

inline optproj::OptimizationConfig to_optimization(const ExperimentConfig& cfg) {
    optproj::OptimizationConfig oc;
    oc.families = cfg.families;
    oc.theta_grid = cfg.grid.build();
    oc.rho0 = cfg.state.build();
    oc.dimension = cfg.projectors.size();
    oc.probe = to_projector_param(cfg.probe, "/probe");
    oc.projectors.clear();
    for (std::size_t i = 0; i < cfg.projectors.size(); ++i)
        oc.projectors.push_back(to_projector_param(cfg.projectors[i], detail::child("/projectors", i)));
    oc.free_parameters = cfg.optimize.free_parameters;
    oc.objective = cfg.optimize.objective;
    oc.mode = cfg.optimize.mode;
    oc.count_model = cfg.count_model;
    oc.n_runs = cfg.n_runs;
    oc.restarts = cfg.optimize.restarts;
    oc.max_evaluations = cfg.optimize.max_evaluations;
    oc.seed = cfg.seed;
    return oc;
}

}  // namespace ghostpol::io
