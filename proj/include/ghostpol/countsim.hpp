#pragma once

/**
 * @file countsim.hpp
 * @brief Monte Carlo coincidence counting with Poisson statistics, detector
 *        efficiencies, accidental coincidences and per-run intensity drift.
 *
 * Every random draw comes from its own std::mt19937_64 stream whose seed is
 * derived from the master seed and the cell coordinates, so results do not
 * depend on evaluation order. Uniforms and Poisson variates are produced by
 * code in this file rather than <random> distributions, whose output is
 * implementation-defined.
 */

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "ghostpol/ghost.hpp"

namespace ghostpol::countsim {

struct CountModel {
    double pair_rate = 5.0e4;           ///< pairs / s
    double integration_time = 1.0;      ///< s per setting
    double eff_signal = 0.2;
    double eff_idler = 0.2;
    double coincidence_window = 3e-9;   ///< s
    double singles_background = 2.0e3;  ///< uncorrelated counts / s per arm
    double drift_amplitude = 0.02;      ///< fractional, per run

    void validate() const {
        auto bad = [](const char* what) { throw DomainError(std::string("CountModel: ") + what); };
        if (!(pair_rate >= 0.0)) bad("pair_rate must be >= 0");
        if (!(integration_time >= 0.0)) bad("integration_time must be >= 0");
        if (!(eff_signal >= 0.0 && eff_signal <= 1.0)) bad("eff_signal must lie in [0, 1]");
        if (!(eff_idler >= 0.0 && eff_idler <= 1.0)) bad("eff_idler must lie in [0, 1]");
        if (!(coincidence_window > 0.0)) bad("coincidence_window must be > 0");
        if (!(singles_background >= 0.0)) bad("singles_background must be >= 0");
        if (!(drift_amplitude >= 0.0 && drift_amplitude < 1.0)) bad("drift_amplitude must lie in [0, 1)");
    }

    /// Mean accidental coincidences per setting.
    double accidental_mean() const {
        return singles_background * singles_background * coincidence_window * integration_time;
    }

    double expected_counts(double p_joint, double drift_factor = 1.0) const {
        return pair_rate * integration_time * eff_signal * eff_idler * p_joint * drift_factor +
               accidental_mean();
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the stream addressed by `keys` under `master`.
inline std::uint64_t stream_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(master);
    for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

using Engine = std::mt19937_64;

/// Uniform in the open interval (0, 1) from the top 53 bits.
inline double uniform01(Engine& g) {
    return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

/// Smallest k with P(X <= k) >= u for X ~ Poisson(mean).
inline std::int64_t poisson_inverse_cdf(double mean, double u) {
    if (!(mean > 0.0)) return 0;
    if (mean < 30.0) {
        double p = std::exp(-mean), f = p;
        std::int64_t k = 0;
        while (u > f && k < 10000) {
            ++k;
            p *= mean / static_cast<double>(k);
            f += p;
        }
        return k;
    }
    // Anchor at the mode and walk, O(sqrt(mean)) steps.
    const double m = std::floor(mean);
    double f = boost::math::gamma_q(m + 1.0, mean);
    double p = std::exp(m * std::log(mean) - mean - std::lgamma(m + 1.0));
    auto k = static_cast<std::int64_t>(m);
    if (u <= f) {
        while (k > 0 && u <= f - p) {
            f -= p;
            p *= static_cast<double>(k) / mean;
            --k;
        }
    } else {
        while (u > f && p > 0.0) {
            ++k;
            p *= mean / static_cast<double>(k);
            f += p;
        }
    }
    return k;
}

inline std::int64_t sample_poisson(double mean, Engine& g) {
    return poisson_inverse_cdf(mean, uniform01(g));
}

/// One coincidence count for joint probability `p_joint`.
inline std::int64_t simulate_counts(double p_joint, const CountModel& model, std::uint64_t seed,
                                    double drift_factor = 1.0) {
    model.validate();
    Engine g(seed);
    return sample_poisson(model.expected_counts(p_joint, drift_factor), g);
}

struct RunSet {
    std::vector<double> theta_deg;
    std::size_t n_projectors = 0;
    /// counts[run][theta][projector]
    std::vector<std::vector<std::vector<std::int64_t>>> counts;
    /// Per-run multiplicative intensity factor actually applied.
    std::vector<double> drift;
    /// singles[run] = {signal, idler}
    std::vector<std::array<std::int64_t, 2>> singles;
    std::uint64_t seed = 0;

    std::size_t n_runs() const { return counts.size(); }
};

/// Stream tags.
enum : std::uint64_t { kDriftStream = 1, kCountStream = 2, kSinglesStream = 3 };

/// Repeated runs over the raw curve. `stream` separates independent curves
/// simulated under the same master seed (e.g. one per sample family).
inline RunSet simulate_runs(const ghost::ResponseCurve& curve, const CountModel& model,
                            std::size_t n_runs, std::uint64_t seed, std::uint64_t stream = 0) {
    model.validate();
    if (n_runs < 2) throw DomainError("simulate_runs: at least 2 runs are required");
    RunSet rs;
    rs.seed = seed;
    rs.n_projectors = curve.dimension();
    for (const auto& s : curve.samples) rs.theta_deg.push_back(s.theta_deg);

    rs.counts.resize(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) {
        Engine dg(stream_seed(seed, {kDriftStream, stream, r}));
        const double drift = 1.0 + model.drift_amplitude * (2.0 * uniform01(dg) - 1.0);
        rs.drift.push_back(drift);

        auto& run = rs.counts[r];
        run.resize(curve.samples.size());
        for (std::size_t t = 0; t < curve.samples.size(); ++t) {
            const auto& pt = curve.samples[t].point;
            run[t].resize(rs.n_projectors);
            for (std::size_t n = 0; n < rs.n_projectors; ++n) {
                Engine g(stream_seed(seed, {kCountStream, stream, r, t, n}));
                run[t][n] = sample_poisson(model.expected_counts(pt(static_cast<Eigen::Index>(n)), drift), g);
            }
        }

        Engine sg(stream_seed(seed, {kSinglesStream, stream, r}));
        const double t_int = model.integration_time * drift;
        rs.singles.push_back(
            {sample_poisson((model.pair_rate * model.eff_signal + model.singles_background) * t_int, sg),
             sample_poisson((model.pair_rate * model.eff_idler + model.singles_background) * t_int, sg)});
    }
    return rs;
}

/// corrected[run][theta][projector]
using CorrectedCounts = std::vector<std::vector<std::vector<double>>>;

/// Subtracts the accidental mean, divides by both efficiencies, clips at 0
/// and, when the model has drift, rescales every run to the mean run total.
inline CorrectedCounts correct_counts(const RunSet& runs, const CountModel& model) {
    model.validate();
    const double eff = model.eff_signal * model.eff_idler;
    if (!(eff > 0.0)) throw DomainError("correct_counts: zero detector efficiency");
    const double acc = model.accidental_mean();

    CorrectedCounts out(runs.n_runs());
    std::vector<double> totals(runs.n_runs(), 0.0);
    for (std::size_t r = 0; r < runs.n_runs(); ++r) {
        out[r].resize(runs.counts[r].size());
        for (std::size_t t = 0; t < runs.counts[r].size(); ++t) {
            out[r][t].resize(runs.counts[r][t].size());
            for (std::size_t n = 0; n < runs.counts[r][t].size(); ++n) {
                const double c = std::max(0.0, (static_cast<double>(runs.counts[r][t][n]) - acc) / eff);
                out[r][t][n] = c;
                totals[r] += c;
            }
        }
    }
    if (model.drift_amplitude > 0.0) {
        double mean_total = 0.0;
        for (double t : totals) mean_total += t;
        mean_total /= static_cast<double>(totals.size());
        for (std::size_t r = 0; r < out.size(); ++r) {
            if (!(totals[r] > 0.0)) continue;
            const double f = mean_total / totals[r];
            for (auto& row : out[r])
                for (auto& v : row) v *= f;
        }
    }
    return out;
}

}  // namespace ghostpol::countsim
