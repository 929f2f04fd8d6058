#pragma once

/**
 * @file tomo.hpp
 * @brief Two-qubit polarization tomography: the 16 product projections,
 *        simulated measurement records and maximum-likelihood reconstruction
 *        with a Cholesky (T-matrix) parametrization.
 */

#include <array>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ghostpol/countsim.hpp"
#include "ghostpol/qstate.hpp"

namespace ghostpol::tomo {

/// Single-photon projection state; R = (H + iV)/sqrt(2), L = (H - iV)/sqrt(2).
inline Eigen::Vector2cd basis_state(char label) {
    const double s = 1.0 / std::sqrt(2.0);
    const cd i{0.0, 1.0};
    switch (label) {
        case 'H': return {1.0, 0.0};
        case 'V': return {0.0, 1.0};
        case 'D': return {s, s};
        case 'A': return {s, -s};
        case 'R': return {cd(s), s * i};
        case 'L': return {cd(s), -s * i};
        default: throw DomainError(std::string("unknown projection label '") + label + "'");
    }
}

inline JonesMatrix projector(char label) {
    const Eigen::Vector2cd v = basis_state(label);
    return v * v.adjoint();
}

struct ProjectionPair {
    char a = 'H';  ///< signal arm
    char b = 'H';  ///< idler arm

    Matrix4c op() const { return kron(projector(a), projector(b)); }
    friend auto operator<=>(const ProjectionPair&, const ProjectionPair&) = default;
};

/// The 16-pair set of James, Kwiat, Munro and White.
inline std::array<ProjectionPair, 16> canonical_projections() {
    return {{{'H', 'H'}, {'H', 'V'}, {'V', 'V'}, {'V', 'H'},
             {'R', 'H'}, {'R', 'V'}, {'D', 'V'}, {'D', 'H'},
             {'D', 'R'}, {'D', 'D'}, {'R', 'D'}, {'H', 'D'},
             {'V', 'D'}, {'V', 'L'}, {'H', 'L'}, {'R', 'L'}}};
}

struct TomographyRecord {
    ProjectionPair pair;
    double counts = 0.0;  ///< corrected coincidences, >= 0
};

using RecordSet = std::vector<TomographyRecord>;

/// Throws unless the records are 16 distinct pairs with non-negative counts
/// and a positive total.
inline void validate_records(const RecordSet& records) {
    if (records.size() != 16)
        throw DomainError("tomography needs exactly 16 records, got " + std::to_string(records.size()));
    std::set<ProjectionPair> seen;
    double total = 0.0;
    for (const auto& r : records) {
        basis_state(r.pair.a);
        basis_state(r.pair.b);
        if (!seen.insert(r.pair).second)
            throw DomainError(std::string("duplicate projection pair ") + r.pair.a + r.pair.b);
        if (!(r.counts >= 0.0)) throw DomainError("tomography counts must be >= 0");
        total += r.counts;
    }
    if (!(total > 0.0)) throw DomainError("tomography records have zero total counts");
}

/// Noise-free records: counts = total * tr[(P_a (x) P_b) rho].
inline RecordSet exact_records(const qstate::TwoQubitDensity& rho, double total = 1.0e6) {
    RecordSet out;
    for (const auto& p : canonical_projections())
        out.push_back({p, total * (p.op() * rho.matrix()).trace().real()});
    return out;
}

/// Simulated raw counts per setting, corrected for accidentals, detector
/// efficiency and drift. Drift is one factor per setting, monitored through
/// the signal singles and divided out.
inline RecordSet simulate_tomography(const qstate::TwoQubitDensity& rho,
                                     const countsim::CountModel& model, std::uint64_t seed) {
    using namespace countsim;
    model.validate();
    const double eff = model.eff_signal * model.eff_idler;
    if (!(eff > 0.0)) throw DomainError("simulate_tomography: zero detector efficiency");

    const auto pairs = canonical_projections();
    RecordSet out;
    std::array<double, 16> singles{};
    double singles_mean = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        Engine dg(stream_seed(seed, {kDriftStream, k}));
        const double drift = 1.0 + model.drift_amplitude * (2.0 * uniform01(dg) - 1.0);
        const double p = std::max(0.0, (pairs[k].op() * rho.matrix()).trace().real());

        Engine cg(stream_seed(seed, {kCountStream, k}));
        const auto raw = sample_poisson(model.expected_counts(p, drift), cg);
        Engine sg(stream_seed(seed, {kSinglesStream, k}));
        singles[k] = static_cast<double>(sample_poisson(
            (model.pair_rate * model.eff_signal + model.singles_background) * model.integration_time * drift, sg));
        singles_mean += singles[k] / 16.0;

        out.push_back({pairs[k], std::max(0.0, (static_cast<double>(raw) - model.accidental_mean()) / eff)});
    }
    if (model.drift_amplitude > 0.0 && singles_mean > 0.0)
        for (std::size_t k = 0; k < out.size(); ++k)
            if (singles[k] > 0.0) out[k].counts *= singles_mean / singles[k];
    return out;
}

struct ReconstructionResult {
    qstate::TwoQubitDensity rho;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    double gradient_norm = 0.0;
    /// Log-likelihood after each accepted iteration, starting point first.
    std::vector<double> likelihood_trace;
};

namespace detail {

using Params = Eigen::Matrix<double, 16, 1>;

/// 4 real diagonal entries, then (re, im) of (1,0) (2,0) (2,1) (3,0) (3,1) (3,2).
inline Matrix4c t_matrix(const Params& x) {
    Matrix4c t = Matrix4c::Zero();
    for (int i = 0; i < 4; ++i) t(i, i) = x(i);
    int k = 4;
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < i; ++j, k += 2) t(i, j) = cd(x(k), x(k + 1));
    return t;
}

inline Params t_params(const Matrix4c& t) {
    Params x;
    for (int i = 0; i < 4; ++i) x(i) = t(i, i).real();
    int k = 4;
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < i; ++j, k += 2) {
            x(k) = t(i, j).real();
            x(k + 1) = t(i, j).imag();
        }
    return x;
}

/// Lower-triangular T with T^dagger T = rho for positive definite rho.
inline Matrix4c lower_factor(const Matrix4c& rho) {
    Eigen::PermutationMatrix<4> rev;
    rev.indices() << 3, 2, 1, 0;
    const Matrix4c flipped = rev * rho * rev.transpose();
    Eigen::LLT<Matrix4c> llt(flipped);
    const Matrix4c l = llt.matrixL();
    const Matrix4c u = rev.transpose() * l * rev;
    return u.adjoint();
}

/// Linear-inversion estimate projected onto the PSD cone, or I/4 when the
/// measurement matrix is singular.
inline Matrix4c linear_estimate(const RecordSet& records) {
    const auto& s = polcalc::stokes_basis();
    Eigen::Matrix<double, 16, 16> b;
    Eigen::Matrix<double, 16, 1> n;
    for (int i = 0; i < 16; ++i) {
        const Matrix4c pi = records[static_cast<std::size_t>(i)].pair.op();
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) b(i, 4 * j + k) = 0.25 * (pi * kron(s[j], s[k])).trace().real();
        n(i) = records[static_cast<std::size_t>(i)].counts;
    }
    Eigen::FullPivLU<Eigen::Matrix<double, 16, 16>> lu(b);
    const Matrix4c mixed = Matrix4c::Identity() / 4.0;
    if (lu.rank() < 16) return mixed;
    const Eigen::Matrix<double, 16, 1> r = lu.solve(n);
    if (!(r(0) > 0.0)) return mixed;

    Matrix4c rho = Matrix4c::Zero();
    for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) rho += 0.25 * r(4 * j + k) / r(0) * kron(s[j], s[k]);
    rho = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4c> eig(rho);
    const Eigen::Vector4d l = eig.eigenvalues().cwiseMax(0.0);
    if (!(l.sum() > 0.0)) return mixed;
    rho = eig.eigenvectors() * (l / l.sum()).asDiagonal() * eig.eigenvectors().adjoint();
    return rho;
}

/// Negative Poisson log-likelihood per total count, with expected counts
/// mu_i = scale * tr(Pi_i T^dagger T).
class Likelihood {
public:
    explicit Likelihood(const RecordSet& records) {
        for (const auto& r : records) {
            ops_.push_back(r.pair.op());
            counts_.push_back(r.counts);
            total_ += r.counts;
            if (r.counts > 0.0) offset_ += r.counts * std::log(r.counts) - r.counts;
        }
    }

    double total() const { return total_; }

    /// Returns +inf when an observed cell has non-positive expectation. The
    /// value is the Poisson deviance (zero for a perfect fit) rather than the
    /// raw log-likelihood, so that it keeps full relative precision close to
    /// the optimum.
    double value(const Params& x, double scale, Params* grad = nullptr) const {
        const Matrix4c t = t_matrix(x);
        const Matrix4c a = t.adjoint() * t;
        double f = 0.0;
        Matrix4c w = Matrix4c::Zero();
        for (std::size_t i = 0; i < ops_.size(); ++i) {
            const double mu = scale * (ops_[i] * a).trace().real();
            if (counts_[i] > 0.0) {
                if (!(mu > 0.0)) return std::numeric_limits<double>::infinity();
                const double u = (mu - counts_[i]) / counts_[i];
                f += counts_[i] * (u - std::log1p(u));
            } else {
                f += mu;
            }
            if (grad) w += (-(counts_[i] > 0.0 ? counts_[i] / mu : 0.0) + 1.0) * scale / total_ * ops_[i];
        }
        if (grad) {
            const Matrix4c g = t * w;
            Params out;
            for (int i = 0; i < 4; ++i) out(i) = 2.0 * g(i, i).real();
            int k = 4;
            for (int i = 1; i < 4; ++i)
                for (int j = 0; j < i; ++j, k += 2) {
                    out(k) = 2.0 * g(i, j).real();
                    out(k + 1) = 2.0 * g(i, j).imag();
                }
            *grad = out;
        }
        return f / total_;
    }

    /// sum_i n_i log mu_i - mu_i in absolute counts.
    double log_likelihood(const Params& x, double scale) const { return offset_ - value(x, scale) * total_; }

private:
    std::vector<Matrix4c> ops_;
    std::vector<double> counts_;
    double total_ = 0.0;
    double offset_ = 0.0;  ///< sum n log n - n over observed cells
};

}  // namespace detail

struct MleOptions {
    double gradient_tol = 1e-8;
    int max_iterations = 10000;
    double init_mixing = 1e-3;
};

/// Maximum-likelihood density matrix from a complete 16-record set, by BFGS
/// with Armijo backtracking on the 16 T-matrix parameters.
inline ReconstructionResult reconstruct_mle(const RecordSet& records, const MleOptions& opt = {}) {
    validate_records(records);
    using detail::Params;
    const detail::Likelihood like(records);

    Matrix4c rho0 = detail::linear_estimate(records);
    rho0 = (1.0 - opt.init_mixing) * rho0 + opt.init_mixing * Matrix4c::Identity() / 4.0;
    double expected_sum = 0.0;
    for (const auto& r : records) expected_sum += (r.pair.op() * rho0).trace().real();
    const double scale = like.total() / expected_sum;

    Params x = detail::t_params(detail::lower_factor(rho0));
    Params g;
    double f = like.value(x, scale, &g);

    ReconstructionResult res;
    res.likelihood_trace.push_back(like.log_likelihood(x, scale));
    Eigen::Matrix<double, 16, 16> h = Eigen::Matrix<double, 16, 16>::Identity();
    bool reset = false;
    int it = 0;
    for (; it < opt.max_iterations && g.norm() >= opt.gradient_tol; ++it) {
        Params d = -h * g;
        if (d.dot(g) >= 0.0) {
            h.setIdentity();
            d = -g;
        }
        double step = 1.0, f_new = 0.0;
        Params x_new, g_new;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
            x_new = x + step * d;
            f_new = like.value(x_new, scale, &g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * d.dot(g)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (reset) break;
            h.setIdentity();
            reset = true;
            continue;
        }
        reset = false;
        const Params s = x_new - x, y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            const double rho_k = 1.0 / sy;
            const Eigen::Matrix<double, 16, 16> id = Eigen::Matrix<double, 16, 16>::Identity();
            h = (id - rho_k * s * y.transpose()) * h * (id - rho_k * y * s.transpose()) +
                rho_k * s * s.transpose();
        }
        x = x_new;
        f = f_new;
        g = g_new;
        res.likelihood_trace.push_back(like.log_likelihood(x, scale));
    }

    const Matrix4c t = detail::t_matrix(x);
    res.rho = qstate::TwoQubitDensity(t.adjoint() * t);
    res.log_likelihood = like.log_likelihood(x, scale);
    res.iterations = it;
    res.gradient_norm = g.norm();
    res.converged = res.gradient_norm < opt.gradient_tol;
    return res;
}

/// Metrics of a reconstruction against the nominal Psi+ state.
inline qstate::StateMetrics report_metrics(const ReconstructionResult& result) {
    if (!result.converged) throw DomainError("report_metrics: reconstruction did not converge");
    return qstate::metrics(result.rho, qstate::psi_plus_vector());
}

}  // namespace ghostpol::tomo
