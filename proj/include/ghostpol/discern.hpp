#pragma once

/**
 * @file discern.hpp
 * @brief Per-sample statistics over repeated runs, axis-aligned 95% confidence
 *        ellipsoids and the geometric distinguishability analysis built on
 *        them.
 */

#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "ghostpol/core.hpp"

namespace ghostpol::discern {

using Vector = Eigen::VectorXd;

struct SampleStats {
    Vector mean;
    Vector std;   ///< unbiased (n - 1) per-axis standard deviation
    Vector ci95;  ///< two-sided Student-t half-widths
    std::size_t n_runs = 0;
};

/// Two-sided 95% Student coefficient t(0.975, dof).
inline double student_t95(std::size_t dof) {
    if (dof < 1) throw DomainError("student_t95: need at least one degree of freedom");
    boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, 0.975);
}

inline SampleStats summarize(const std::vector<Vector>& points) {
    if (points.size() < 2) throw DomainError("summarize: at least 2 runs are required");
    const auto dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw DomainError("summarize: inconsistent point dimension");

    SampleStats s;
    s.n_runs = points.size();
    const double n = static_cast<double>(points.size());
    // Offsets from the first run, so identical runs give exactly zero spread.
    const Vector& ref = points.front();
    Vector shift = Vector::Zero(dim);
    for (const auto& p : points) shift += p - ref;
    shift /= n;
    Vector var = Vector::Zero(dim);
    for (const auto& p : points) var += (p - ref - shift).cwiseAbs2();
    s.mean = ref + shift;
    s.std = (var / (n - 1.0)).cwiseSqrt();
    s.ci95 = student_t95(points.size() - 1) * s.std / std::sqrt(n);
    return s;
}

struct EllipsoidRegion {
    Vector center;
    Vector semi_axes;

    /// Support function sqrt(sum_j a_j^2 u_j^2) along unit direction u.
    double support(const Vector& u) const {
        return std::sqrt((semi_axes.cwiseAbs2().array() * u.cwiseAbs2().array()).sum());
    }
};

inline constexpr double kSemiAxisFloor = 1e-12;

/// Region with semi-axes equal to the 95% half-widths, floored at
/// kSemiAxisFloor times the coordinate scale.
inline EllipsoidRegion region(const SampleStats& s, double coordinate_scale = 1.0) {
    return {s.mean, s.ci95.cwiseMax(kSemiAxisFloor * coordinate_scale)};
}

/// Sufficient disjointness test: the regions' extents along the line joining
/// the centers must not reach each other.
inline bool separable(const EllipsoidRegion& a, const EllipsoidRegion& b) {
    if (a.center.size() != b.center.size() || a.semi_axes.size() != a.center.size() ||
        b.semi_axes.size() != b.center.size())
        throw DomainError("separable: dimension mismatch");
    const Vector d = b.center - a.center;
    const double dist = d.norm();
    if (!(dist > 0.0)) return false;
    const Vector u = d / dist;
    return a.support(u) + b.support(u) < dist;
}

/// Distance slack dist - h_a - h_b (positive iff separable).
inline double margin(const EllipsoidRegion& a, const EllipsoidRegion& b) {
    const Vector d = b.center - a.center;
    const double dist = d.norm();
    if (!(dist > 0.0)) return -(a.semi_axes.norm() + b.semi_axes.norm());
    const Vector u = d / dist;
    return dist - a.support(u) - b.support(u);
}

/// Greedy sweep from index 0: a sample is kept iff it is separable from every
/// sample kept so far. The closing pair (last kept, first kept) is checked
/// again and the last one dropped on conflict.
inline std::vector<std::size_t> max_distinguishable_subset(const std::vector<EllipsoidRegion>& regions) {
    if (regions.empty()) throw DomainError("max_distinguishable_subset: empty input");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        bool ok = true;
        for (std::size_t k : kept)
            if (!separable(regions[k], regions[i])) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(i);
    }
    if (kept.size() > 1 && !separable(regions[kept.back()], regions[kept.front()])) kept.pop_back();
    return kept;
}

inline bool pairwise_separable(const std::vector<EllipsoidRegion>& regions,
                               const std::vector<std::size_t>& kept) {
    for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = i + 1; j < kept.size(); ++j)
            if (!separable(regions[kept[i]], regions[kept[j]])) return false;
    return true;
}

struct StepStats {
    double median = 0.0;
    double max = 0.0;
    double min = 0.0;
    std::vector<double> gaps;
};

/// Consecutive angular gaps of the kept samples, including the wrap-around
/// gap over `period_deg`.
inline StepStats step_stats(std::vector<double> kept_thetas, double period_deg = 180.0) {
    if (kept_thetas.size() < 2) throw DomainError("step_stats: at least 2 kept samples are required");
    std::sort(kept_thetas.begin(), kept_thetas.end());
    StepStats s;
    for (std::size_t i = 0; i + 1 < kept_thetas.size(); ++i) s.gaps.push_back(kept_thetas[i + 1] - kept_thetas[i]);
    s.gaps.push_back(kept_thetas.front() + period_deg - kept_thetas.back());

    std::vector<double> sorted = s.gaps;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    s.min = sorted.front();
    s.max = sorted.back();
    return s;
}

/// Kept samples of one family.
struct FamilySelection {
    std::string label;
    std::vector<double> theta_deg;        ///< every sample
    std::vector<EllipsoidRegion> regions; ///< every sample
    std::vector<std::size_t> kept;        ///< indices into the above
};

struct Exclusion {
    std::string family;
    double theta_deg = 0.0;
    std::string conflicts_with;
    double conflicting_theta_deg = 0.0;
};

/// Within-family slack of kept sample `k`: smallest margin to any other kept
/// sample of the same family.
inline double own_margin(const FamilySelection& f, std::size_t k) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t other : f.kept)
        if (other != k) m = std::min(m, margin(f.regions[k], f.regions[other]));
    return m;
}

/// Removes cross-family conflicts: for every non-separable pair of kept
/// samples from different families, the one with the smaller within-family
/// margin is dropped (ties drop from `b`). Conflicts are visited in kept
/// order of `a`, then of `b`.
inline std::vector<Exclusion> cross_family_exclusions(FamilySelection& a, FamilySelection& b) {
    std::vector<Exclusion> out;
    for (std::size_t ia = 0; ia < a.kept.size();) {
        const std::size_t i = a.kept[ia];
        bool dropped_a = false;
        for (std::size_t jb = 0; jb < b.kept.size();) {
            const std::size_t j = b.kept[jb];
            if (separable(a.regions[i], b.regions[j])) {
                ++jb;
                continue;
            }
            if (own_margin(a, i) < own_margin(b, j)) {
                out.push_back({a.label, a.theta_deg[i], b.label, b.theta_deg[j]});
                a.kept.erase(a.kept.begin() + static_cast<std::ptrdiff_t>(ia));
                dropped_a = true;
                break;
            }
            out.push_back({b.label, b.theta_deg[j], a.label, a.theta_deg[i]});
            b.kept.erase(b.kept.begin() + static_cast<std::ptrdiff_t>(jb));
        }
        if (!dropped_a) ++ia;
    }
    return out;
}

struct FamilyReport {
    std::string label;
    std::vector<double> kept_thetas;
    std::size_t count = 0;
    StepStats steps;  ///< zero when fewer than 2 samples are kept
};

struct DistinguishabilityReport {
    std::vector<FamilyReport> families;
    std::vector<Exclusion> exclusions;

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& f : families) n += f.count;
        return n;
    }
};

inline FamilyReport family_report(const FamilySelection& f, double period_deg = 180.0) {
    FamilyReport r;
    r.label = f.label;
    for (std::size_t k : f.kept) r.kept_thetas.push_back(f.theta_deg[k]);
    r.count = r.kept_thetas.size();
    if (r.count >= 2) r.steps = step_stats(r.kept_thetas, period_deg);
    return r;
}

}  // namespace ghostpol::discern
