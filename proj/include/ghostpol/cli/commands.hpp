#pragma once

/**
 * @file commands.hpp
 * @brief The four pipeline commands behind the command-line tool. Each takes
 *        a parsed config and an output directory, writes its files there and
 *        returns a short text summary.
 */

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ghostpol/io/config.hpp"
#include "ghostpol/io/csv.hpp"
#include "ghostpol/io/svg.hpp"
#include "ghostpol/pipeline.hpp"

namespace ghostpol::cli {

namespace fs = std::filesystem;

inline std::ofstream open_out(const fs::path& p) {
    fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Error("cannot write " + p.string());
    return os;
}

inline void write_text(const fs::path& p, const std::string& text) { open_out(p) << text; }

struct SweepOutput {
    std::vector<ghost::ResponseCurve> raw;  ///< probabilities, or run-averaged corrected counts
    std::vector<ghost::ResponseCurve> normalized;
    std::vector<countsim::RunSet> runs;     ///< noisy mode only
    std::vector<countsim::CorrectedCounts> corrected;
};

/// Response curves for every configured family, normalized by one shared
/// maximum. Noisy mode replaces each point by its run-averaged corrected
/// counts.
inline SweepOutput compute_sweep(const io::ExperimentConfig& cfg) {
    if (cfg.noisy && cfg.coordinates == ghost::Coordinates::conditional)
        throw io::ConfigError("/coordinates", "conditional coordinates are only available with noisy: false");
    const auto rho0 = cfg.state.build();
    const auto grid = cfg.grid.build();
    SweepOutput out;
    for (const auto& fam : cfg.families)
        out.raw.push_back(ghost::sweep_family(rho0, fam, grid, cfg.probe, cfg.projectors, cfg.coordinates));
    if (cfg.noisy) {
        for (std::size_t f = 0; f < out.raw.size(); ++f) {
            auto rs = countsim::simulate_runs(out.raw[f], cfg.count_model, cfg.n_runs, cfg.seed, f);
            auto cc = countsim::correct_counts(rs, cfg.count_model);
            for (std::size_t t = 0; t < out.raw[f].samples.size(); ++t) {
                auto& p = out.raw[f].samples[t].point;
                p.setZero();
                for (const auto& run : cc)
                    for (std::size_t n = 0; n < run[t].size(); ++n) p(static_cast<Eigen::Index>(n)) += run[t][n];
                p /= static_cast<double>(cc.size());
            }
            out.runs.push_back(std::move(rs));
            out.corrected.push_back(std::move(cc));
        }
    }
    out.normalized = ghost::normalize_dataset(out.raw);
    return out;
}

/// File-name-safe version of a family label.
inline std::string file_tag(const std::string& label) {
    std::string s;
    for (char c : label) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return s.empty() ? "family" : s;
}

inline std::string cmd_sweep(const io::ExperimentConfig& cfg, const fs::path& out_dir) {
    const auto sw = compute_sweep(cfg);
    for (std::size_t f = 0; f < sw.raw.size(); ++f) {
        const auto tag = file_tag(cfg.families[f].label);
        {
            auto os = open_out(out_dir / ("curve_" + tag + ".csv"));
            io::write_curve_csv(os, sw.normalized[f], sw.raw[f]);
        }
        if (cfg.noisy) {
            auto os = open_out(out_dir / ("runs_" + tag + ".csv"));
            io::write_runs_csv(os, sw.runs[f], sw.corrected[f]);
        }
    }
    {
        auto os = open_out(out_dir / "curves.svg");
        io::write_curves_svg(os, sw.normalized, cfg.noisy ? "simulated coincidences" : "noiseless response");
    }
    std::ostringstream s;
    s << "sweep: " << sw.normalized.size() << " families x " << cfg.grid.build().size() << " angles x "
      << cfg.projectors.size() << " projectors (" << (cfg.noisy ? "noisy, seed " + std::to_string(cfg.seed) : "noiseless")
      << ")\n";
    return s.str();
}

inline pipeline::DiscriminationInput discrimination_input(const io::ExperimentConfig& cfg) {
    if (!cfg.noisy) throw io::ConfigError("/noisy", "discrimination needs simulated runs (noisy: true)");
    if (cfg.coordinates != ghost::Coordinates::joint)
        throw io::ConfigError("/coordinates", "discrimination works on joint coincidences");
    pipeline::DiscriminationInput in;
    in.rho0 = cfg.state.build();
    in.families = cfg.families;
    in.theta_grid = cfg.grid.build();
    in.probe = cfg.probe;
    in.projectors = cfg.projectors;
    in.model = cfg.count_model;
    in.n_runs = cfg.n_runs;
    in.seed = cfg.seed;
    return in;
}

inline std::string summary_text(const discern::DistinguishabilityReport& rep) {
    std::ostringstream s;
    for (const auto& f : rep.families) {
        s << "family " << f.label << ": " << f.count << " distinguishable";
        if (f.count >= 2)
            s << "; step median " << io::num(f.steps.median) << " deg, max " << io::num(f.steps.max) << " deg, min "
              << io::num(f.steps.min) << " deg";
        s << '\n';
    }
    for (const auto& e : rep.exclusions)
        s << "excluded " << e.family << ' ' << io::num(e.theta_deg) << " deg (overlaps " << e.conflicts_with << ' '
          << io::num(e.conflicting_theta_deg) << " deg)\n";
    s << "total: " << rep.total() << " distinguishable\n";
    return s.str();
}

inline std::string cmd_discriminate(const io::ExperimentConfig& cfg, const fs::path& out_dir) {
    const auto res = pipeline::run_discrimination(discrimination_input(cfg));
    std::vector<std::vector<discern::SampleStats>> stats;
    for (const auto& f : res.families) stats.push_back(f.stats);
    {
        auto os = open_out(out_dir / "report.csv");
        io::write_report_csv(os, res.selections, stats);
    }
    for (std::size_t f = 0; f < res.families.size(); ++f) {
        auto os = open_out(out_dir / ("runs_" + file_tag(res.selections[f].label) + ".csv"));
        io::write_runs_csv(os, res.families[f].runs, res.families[f].corrected);
    }
    {
        auto os = open_out(out_dir / "scatter.svg");
        io::write_scatter_svg(os, res.selections, "95% confidence regions");
    }
    const std::string summary = summary_text(res.report);
    write_text(out_dir / "summary.txt", summary);
    return summary;
}

inline std::string metrics_text(const qstate::StateMetrics& m, const tomo::ReconstructionResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "concurrence %.4f\nlinear_entropy %.4f\nfidelity %.4f\npurity %.4f\n"
                  "log_likelihood %.6g\niterations %d\nconverged %s\n",
                  m.concurrence, m.linear_entropy, m.fidelity, m.purity, r.log_likelihood, r.iterations,
                  r.converged ? "true" : "false");
    return buf;
}

inline std::string cmd_tomo(const io::ExperimentConfig& cfg, const fs::path& out_dir) {
    tomo::RecordSet records;
    if (!cfg.tomography.records_csv.empty()) {
        std::ifstream in(cfg.tomography.records_csv);
        if (!in) throw io::ConfigError("/tomography/records_csv", "cannot open " + cfg.tomography.records_csv);
        records = io::read_records_csv(in, cfg.tomography.records_csv);
    } else if (cfg.noisy) {
        records = tomo::simulate_tomography(cfg.state.build(), cfg.count_model, cfg.seed);
    } else {
        records = tomo::exact_records(cfg.state.build());
    }
    tomo::validate_records(records);
    const auto result = tomo::reconstruct_mle(records, cfg.tomography.mle);
    const auto m = qstate::metrics(result.rho);
    {
        auto os = open_out(out_dir / "records.csv");
        io::write_records_csv(os, records);
    }
    {
        auto os = open_out(out_dir / "rho.csv");
        io::write_density_csv(os, result.rho.matrix());
    }
    const std::string text = metrics_text(m, result);
    write_text(out_dir / "metrics.txt", text);
    if (!result.converged)
        throw Error("tomography did not converge (gradient norm " + io::num(result.gradient_norm) + "); outputs written");
    return text;
}

inline std::string cmd_optimize(const io::ExperimentConfig& cfg, const fs::path& out_dir) {
    const auto oc = io::to_optimization(cfg);
    const auto res = optproj::optimize(oc);
    std::vector<ghost::Elements> proj;
    for (const auto& p : res.best.projectors) proj.push_back(p.elements());
    write_text(out_dir / "best.json", io::settings_fragment(res.best.probe.elements(), proj).dump(2) + "\n");
    {
        auto os = open_out(out_dir / "trace.csv");
        io::write_trace_csv(os, res.trace);
    }
    std::ostringstream s;
    s << "objective " << io::num(res.value) << " after " << res.evaluations << " evaluations"
      << (res.converged ? "" : " (budget exhausted before every restart converged)") << '\n';
    auto line = [&](const std::string& name, const optproj::ProjectorParam& p) {
        s << name << ": qwp " << io::num(p.qwp_deg) << " deg, polarizer " << io::num(p.lp_deg) << " deg";
        if (!std::isinf(p.extinction)) s << ", extinction " << io::num(p.extinction);
        s << '\n';
    };
    line("probe", res.best.probe);
    for (std::size_t i = 0; i < res.best.projectors.size(); ++i) line("projector" + std::to_string(i + 1), res.best.projectors[i]);
    const std::string text = s.str();
    write_text(out_dir / "optimize.txt", text);
    return text;
}

}  // namespace ghostpol::cli
