#pragma once

/**
 * @file qstate.hpp
 * @brief Two-qubit polarization states and their entanglement metrics.
 *
 * Basis order is (HH, HV, VH, VV) with the signal photon as the first
 * factor.
 */

#include "ghostpol/core.hpp"

namespace ghostpol::qstate {

inline constexpr double kHermitianTol = 1e-10;
inline constexpr double kNegativeEigenTol = 1e-9;

/// Validated 4x4 density matrix. Construction enforces Hermiticity and
/// positivity; eigenvalues in [-1e-9, 0) are clipped and the matrix
/// renormalized, which is reported by clipped().
class TwoQubitDensity {
public:
    TwoQubitDensity() : rho_(Matrix4c::Identity() / 4.0) {}

    explicit TwoQubitDensity(const Matrix4c& m, bool normalize = true) {
        if (!m.allFinite()) throw DomainError("density matrix has non-finite entries");
        const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (herm > kHermitianTol * std::max(1.0, m.cwiseAbs().maxCoeff()))
            throw DomainError("density matrix is not Hermitian");
        Matrix4c h = 0.5 * (m + m.adjoint());

        Eigen::SelfAdjointEigenSolver<Matrix4c> eig(h);
        const double trace = h.trace().real();
        const double lmin = eig.eigenvalues()(0);
        if (lmin < -kNegativeEigenTol * std::max(1.0, trace))
            throw DomainError("density matrix is not positive semidefinite");
        if (lmin < 0.0) {
            Eigen::Vector4d l = eig.eigenvalues().cwiseMax(0.0);
            h = eig.eigenvectors() * l.asDiagonal() * eig.eigenvectors().adjoint();
            clipped_ = true;
        }
        if (normalize) {
            const double tr = h.trace().real();
            if (!(tr > 0.0)) throw DomainError("density matrix has zero trace");
            h /= tr;
        }
        rho_ = h;
        normalized_ = normalize;
    }

    const Matrix4c& matrix() const { return rho_; }
    bool normalized() const { return normalized_; }
    bool clipped() const { return clipped_; }
    double trace() const { return rho_.trace().real(); }

private:
    Matrix4c rho_;
    bool normalized_ = true;
    bool clipped_ = false;
};

struct StateMetrics {
    double concurrence = 0.0;
    double linear_entropy = 0.0;
    double fidelity = 0.0;
    double purity = 0.0;
};

inline Vector4c psi_plus_vector() {
    Vector4c v = Vector4c::Zero();
    v(1) = v(2) = 1.0 / std::sqrt(2.0);
    return v;
}

/// (|HV> + |VH>)/sqrt(2)
inline TwoQubitDensity bell_psi_plus() {
    const Vector4c v = psi_plus_vector();
    return TwoQubitDensity(v * v.adjoint());
}

/// p |Psi+><Psi+| + (1 - p) I/4
inline TwoQubitDensity werner_mix(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("Werner weight must lie in [0, 1]");
    const Vector4c v = psi_plus_vector();
    return TwoQubitDensity(p * v * v.adjoint() + (1.0 - p) * Matrix4c::Identity() / 4.0);
}

enum class Subsystem { signal, idler };

/// Partial trace over `over`; returns the reduced state of the other photon.
inline JonesMatrix partial_trace(const Matrix4c& rho, Subsystem over) {
    JonesMatrix out = JonesMatrix::Zero();
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int k = 0; k < 2; ++k)
                out(x, y) += over == Subsystem::signal ? rho(2 * k + x, 2 * k + y)
                                                       : rho(2 * x + k, 2 * y + k);
    return out;
}

inline JonesMatrix partial_trace(const TwoQubitDensity& rho, Subsystem over) {
    return partial_trace(rho.matrix(), over);
}

/// Wootters concurrence from the Hermitian form sqrt(rho) rho~ sqrt(rho).
inline double concurrence(const Matrix4c& rho) {
    Matrix4c yy = Matrix4c::Zero();
    yy(0, 3) = yy(3, 0) = -1.0;
    yy(1, 2) = yy(2, 1) = 1.0;
    const Matrix4c flipped = yy * rho.conjugate() * yy;

    Eigen::SelfAdjointEigenSolver<Matrix4c> eig(rho);
    const Eigen::Vector4d l = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix4c sq = eig.eigenvectors() * l.asDiagonal() * eig.eigenvectors().adjoint();

    Eigen::SelfAdjointEigenSolver<Matrix4c> eig2(sq * flipped * sq);
    Eigen::Vector4d lam = eig2.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::sort(lam.data(), lam.data() + 4, std::greater<>());
    return std::max(0.0, lam(0) - lam(1) - lam(2) - lam(3));
}

inline double purity(const Matrix4c& rho) { return (rho * rho).trace().real(); }

/// Scaled so that I/4 has linear entropy 1.
inline double linear_entropy(const Matrix4c& rho) {
    return 4.0 / 3.0 * (1.0 - purity(rho));
}

/// <psi|rho|psi> for a pure reference (normalized internally).
inline double fidelity(const Matrix4c& rho, const Vector4c& reference) {
    const Vector4c r = reference.normalized();
    return (r.adjoint() * rho * r)(0, 0).real();
}

inline StateMetrics metrics(const TwoQubitDensity& rho,
                            const Vector4c& reference = psi_plus_vector()) {
    if (!rho.normalized()) throw DomainError("metrics require a trace-normalized state");
    const Matrix4c& m = rho.matrix();
    return {concurrence(m), linear_entropy(m), fidelity(m, reference), purity(m)};
}

}  // namespace ghostpol::qstate
