#pragma once

/**
 * @file polcalc.hpp
 * @brief Jones and Mueller calculus for the optical elements used as samples
 *        and projectors.
 *
 * Conventions used throughout the library:
 * - Jones basis (H, V); angles in degrees measured from the global vertical.
 * - An element at theta = 0 has its transmission (or fast) axis vertical and
 *   is rotated as J(theta) = R(theta) J0 R(-theta).
 * - Stokes: S1 = I_H - I_V, S2 = I_{+45} - I_{-45}, S3 = I_R - I_L with
 *   |R> = (|H> + i|V>)/sqrt(2), i.e. S3 = 2 Im(E_H* E_V).
 * - Retarders carry zero phase on the fast axis and e^{i delta} on the slow
 *   axis.
 *
 * Published Mueller tables that use a vertical Stokes reference axis are
 * compared through in_frame(M, kTableFrame).
 */

#include <array>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "ghostpol/core.hpp"

namespace ghostpol::polcalc {

/// Sense of R(theta). +1 gives R(90) = [[0,-1],[1,0]].
inline constexpr double kRotationSense = 1.0;

/// Reference axis of the Stokes S1/S2 components.
enum class StokesFrame { horizontal_reference, vertical_reference };

/// Frame the published fixed-projector Mueller matrices are expressed in.
inline constexpr StokesFrame kTableFrame = StokesFrame::vertical_reference;

enum class ElementKind { ideal_polarizer, partial_polarizer, retarder };

struct PolElement {
    ElementKind kind = ElementKind::ideal_polarizer;
    double theta_deg = 0.0;
    /// Intensity transmission ratio pass:block, partial polarizers only.
    double extinction = std::numeric_limits<double>::infinity();
    /// Retardance in radians, retarders only.
    double retardance_rad = kPi / 2.0;

    static PolElement polarizer(double theta_deg) {
        return {ElementKind::ideal_polarizer, wrap_180(theta_deg)};
    }
    static PolElement partial_polarizer(double extinction, double theta_deg) {
        if (!(extinction >= 1.0))
            throw DomainError("partial polarizer extinction must be >= 1");
        PolElement e{ElementKind::partial_polarizer, wrap_180(theta_deg)};
        e.extinction = extinction;
        return e;
    }
    static PolElement retarder(double retardance_rad, double theta_deg) {
        PolElement e{ElementKind::retarder, wrap_180(theta_deg)};
        e.retardance_rad = retardance_rad;
        return e;
    }
    static PolElement qwp(double theta_deg) { return retarder(kPi / 2.0, theta_deg); }

    /// Polarizer with the given extinction; infinity selects the ideal kind.
    static PolElement linear_polarizer(double extinction, double theta_deg) {
        return std::isinf(extinction) ? polarizer(theta_deg)
                                      : partial_polarizer(extinction, theta_deg);
    }

    friend bool operator==(const PolElement&, const PolElement&) = default;
};

inline JonesMatrix rotation_jones(double theta_deg) {
    const double t = kRotationSense * deg_to_rad(theta_deg);
    const double c = std::cos(t), s = std::sin(t);
    JonesMatrix r;
    r << c, -s, s, c;
    return r;
}

/// Jones matrix of the element with its axis vertical.
inline JonesMatrix base_jones(const PolElement& e) {
    JonesMatrix j = JonesMatrix::Zero();
    switch (e.kind) {
        case ElementKind::ideal_polarizer:
            j(1, 1) = 1.0;
            break;
        case ElementKind::partial_polarizer:
            if (!(e.extinction >= 1.0))
                throw DomainError("partial polarizer extinction must be >= 1");
            j(0, 0) = 1.0 / std::sqrt(e.extinction);
            j(1, 1) = 1.0;
            break;
        case ElementKind::retarder:
            j(0, 0) = std::polar(1.0, e.retardance_rad);
            j(1, 1) = 1.0;
            break;
    }
    return j;
}

inline JonesMatrix element_jones(const PolElement& e) {
    if (!std::isfinite(e.theta_deg)) throw DomainError("element angle must be finite");
    const double theta = wrap_180(e.theta_deg);
    return rotation_jones(theta) * base_jones(e) * rotation_jones(-theta);
}

/// Product of the elements in reverse traversal order (last element leftmost).
inline JonesMatrix compose(std::span<const PolElement> elements) {
    if (elements.empty()) throw DomainError("compose: empty element list");
    JonesMatrix j = JonesMatrix::Identity();
    for (const auto& e : elements) j = element_jones(e) * j;
    return j;
}

inline JonesMatrix compose(std::initializer_list<PolElement> elements) {
    return compose(std::span<const PolElement>(elements.begin(), elements.size()));
}

/// Pauli basis matching the Stokes convention above.
inline const std::array<JonesMatrix, 4>& stokes_basis() {
    static const std::array<JonesMatrix, 4> basis = [] {
        const cd i{0.0, 1.0};
        std::array<JonesMatrix, 4> s;
        s[0] << 1, 0, 0, 1;
        s[1] << 1, 0, 0, -1;
        s[2] << 0, 1, 1, 0;
        s[3] << 0, -i, i, 0;
        return s;
    }();
    return basis;
}

/// M_ij = tr(s_i J s_j J^dagger) / 2, so that the Mueller action on Stokes
/// vectors equals C -> J C J^dagger on coherency matrices.
inline MuellerMatrix jones_to_mueller(const JonesMatrix& j) {
    const auto& s = stokes_basis();
    MuellerMatrix m;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            m(r, c) = 0.5 * (s[r] * j * s[c] * j.adjoint()).trace().real();
    return m;
}

inline StokesVector coherency_to_stokes(const JonesMatrix& coherency) {
    const auto& s = stokes_basis();
    StokesVector v;
    for (int k = 0; k < 4; ++k) v(k) = (s[k] * coherency).trace().real();
    return v;
}

inline JonesMatrix stokes_to_coherency(const StokesVector& v) {
    const auto& s = stokes_basis();
    JonesMatrix c = JonesMatrix::Zero();
    for (int k = 0; k < 4; ++k) c += 0.5 * v(k) * s[k];
    return c;
}

/// Re-expresses a Mueller matrix from the default (horizontal reference)
/// frame into `frame`.
inline MuellerMatrix in_frame(const MuellerMatrix& m, StokesFrame frame) {
    if (frame == StokesFrame::horizontal_reference) return m;
    const Eigen::Vector4d f(1.0, -1.0, -1.0, 1.0);
    return f.asDiagonal() * m * f.asDiagonal();
}

/// Singular values <= 1 (within tolerance).
inline bool is_passive(const JonesMatrix& j, double tol = 1e-9) {
    Eigen::JacobiSVD<JonesMatrix> svd(j);
    return svd.singularValues()(0) <= 1.0 + tol;
}

inline bool satisfies_mueller_bounds(const MuellerMatrix& m, double tol = 1e-9) {
    if (m(0, 0) < -tol) return false;
    return (m.array().abs() <= m(0, 0) + tol).all();
}

struct ChoiDecomposition {
    Matrix4c choi;
    bool physical = false;
    double min_eigenvalue = 0.0;
    /// Kraus operators K_k with sum_k K_k C K_k^dagger reproducing the map.
    /// Only populated for physical maps.
    std::vector<JonesMatrix> kraus;
};

/// Choi matrix sum_ab |a><b| (x) Phi(|a><b|) of the coherency-matrix map
/// defined by `m`; physical iff positive semidefinite within `tol`.
inline ChoiDecomposition mueller_to_choi(const MuellerMatrix& m, double tol = 1e-9) {
    const auto& s = stokes_basis();
    ChoiDecomposition out;
    out.choi = Matrix4c::Zero();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (m(i, j) != 0.0)
                out.choi += 0.5 * m(i, j) * kron(s[j].transpose(), s[i]);

    Eigen::SelfAdjointEigenSolver<Matrix4c> eig(out.choi);
    out.min_eigenvalue = eig.eigenvalues()(0);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    out.physical = out.min_eigenvalue >= -tol * scale;
    if (!out.physical) return out;

    for (int k = 3; k >= 0; --k) {
        const double lambda = eig.eigenvalues()(k);
        if (lambda <= tol * scale) continue;
        const Vector4c v = std::sqrt(lambda) * eig.eigenvectors().col(k);
        JonesMatrix kr;
        for (int a = 0; a < 2; ++a)
            for (int c = 0; c < 2; ++c) kr(c, a) = v(2 * a + c);
        out.kraus.push_back(kr);
    }
    return out;
}

}  // namespace ghostpol::polcalc
