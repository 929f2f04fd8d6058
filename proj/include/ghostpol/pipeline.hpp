#pragma once

/**
 * @file pipeline.hpp
 * @brief Sweep -> simulated runs -> statistics -> distinguishability, shared
 *        by the command-line tool and the acceptance suite.
 */

#include <string>
#include <vector>

#include "ghostpol/countsim.hpp"
#include "ghostpol/discern.hpp"
#include "ghostpol/ghost.hpp"

namespace ghostpol::pipeline {

struct DiscriminationInput {
    qstate::TwoQubitDensity rho0 = qstate::bell_psi_plus();
    std::vector<ghost::SampleFamily> families;
    std::vector<double> theta_grid;
    ghost::Elements probe;
    std::vector<ghost::Elements> projectors;
    countsim::CountModel model;
    std::size_t n_runs = 8;
    std::uint64_t seed = 1;
};

struct FamilyData {
    ghost::ResponseCurve curve;  ///< noiseless joint probabilities
    countsim::RunSet runs;
    countsim::CorrectedCounts corrected;
    std::vector<discern::SampleStats> stats;  ///< normalized coordinates
};

struct DiscriminationResult {
    std::vector<FamilyData> families;
    double scale = 0.0;  ///< shared normalization divisor (corrected counts)
    std::vector<discern::FamilySelection> selections;
    discern::DistinguishabilityReport report;
};

inline DiscriminationResult run_discrimination(const DiscriminationInput& in) {
    if (in.families.empty()) throw DomainError("no sample families configured");
    DiscriminationResult res;
    for (std::size_t f = 0; f < in.families.size(); ++f) {
        FamilyData d;
        d.curve = ghost::sweep_family(in.rho0, in.families[f], in.theta_grid, in.probe, in.projectors);
        d.runs = countsim::simulate_runs(d.curve, in.model, in.n_runs, in.seed, f);
        d.corrected = countsim::correct_counts(d.runs, in.model);
        res.families.push_back(std::move(d));
    }

    // One shared divisor: the largest run-averaged corrected count.
    for (const auto& d : res.families)
        for (std::size_t t = 0; t < d.curve.samples.size(); ++t)
            for (std::size_t n = 0; n < d.runs.n_projectors; ++n) {
                double mean = 0.0;
                for (const auto& run : d.corrected) mean += run[t][n];
                res.scale = std::max(res.scale, mean / static_cast<double>(d.corrected.size()));
            }
    if (!(res.scale > 0.0)) throw DomainError("all corrected counts are zero; nothing to discriminate");

    for (std::size_t f = 0; f < res.families.size(); ++f) {
        auto& d = res.families[f];
        discern::FamilySelection sel;
        sel.label = in.families[f].label;
        for (std::size_t t = 0; t < d.curve.samples.size(); ++t) {
            std::vector<Eigen::VectorXd> pts;
            for (const auto& run : d.corrected) {
                Eigen::VectorXd p(static_cast<Eigen::Index>(run[t].size()));
                for (std::size_t n = 0; n < run[t].size(); ++n) p(static_cast<Eigen::Index>(n)) = run[t][n] / res.scale;
                pts.push_back(std::move(p));
            }
            d.stats.push_back(discern::summarize(pts));
            sel.theta_deg.push_back(d.curve.samples[t].theta_deg);
            sel.regions.push_back(discern::region(d.stats.back()));
        }
        sel.kept = discern::max_distinguishable_subset(sel.regions);
        res.selections.push_back(std::move(sel));
    }

    for (std::size_t a = 0; a < res.selections.size(); ++a)
        for (std::size_t b = a + 1; b < res.selections.size(); ++b) {
            auto ex = discern::cross_family_exclusions(res.selections[a], res.selections[b]);
            res.report.exclusions.insert(res.report.exclusions.end(), ex.begin(), ex.end());
        }
    for (const auto& s : res.selections) res.report.families.push_back(discern::family_report(s));
    return res;
}

}  // namespace ghostpol::pipeline
