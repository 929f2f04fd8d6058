#pragma once

/**
 * @file ghost.hpp
 * @brief Nonlocal measurement engine: the signal photon passes the sample and
 *        the fixed probe projector before a polarization-blind detector, the
 *        idler photon is analysed by one of n projectors, and the coincidence
 *        probabilities place each sample in an n-dimensional response space.
 */

#include <string>
#include <variant>
#include <vector>

#include "ghostpol/polcalc.hpp"
#include "ghostpol/qstate.hpp"

namespace ghostpol::ghost {

using polcalc::PolElement;
using Elements = std::vector<PolElement>;

/// Conditional probabilities were requested for a probe that never heralds.
struct UnheraldableError : Error {
    UnheraldableError() : Error("unheraldable: herald probability is zero") {}
};

/// Kraus operators applied to the signal photon: sample followed by the
/// fixed probe projector.
struct ProbeTransform {
    std::vector<JonesMatrix> kraus;

    static ProbeTransform identity() { return {{JonesMatrix::Identity()}}; }
    static ProbeTransform from_jones(const JonesMatrix& j) { return {{j}}; }

    /// sum_k K^dagger K <= I within `tol`.
    bool trace_non_increasing(double tol = 1e-9) const {
        JonesMatrix e = JonesMatrix::Zero();
        for (const auto& k : kraus) e += k.adjoint() * k;
        Eigen::SelfAdjointEigenSolver<JonesMatrix> eig(e);
        return eig.eigenvalues()(1) <= 1.0 + tol;
    }
};

/// A family of samples obtained by rotating one base element (or one base
/// Mueller matrix) through a grid of angles.
struct SampleFamily {
    std::string label;
    std::variant<PolElement, MuellerMatrix> base;

    static SampleFamily lp() { return {"LP", PolElement::polarizer(0.0)}; }
    static SampleFamily qwp() { return {"QWP", PolElement::qwp(0.0)}; }
    static SampleFamily element(std::string label, PolElement e) { return {std::move(label), e}; }
    static SampleFamily mueller(std::string label, const MuellerMatrix& m) {
        return {std::move(label), m};
    }
};

inline MuellerMatrix rotate_mueller(const MuellerMatrix& m, double theta_deg) {
    return polcalc::jones_to_mueller(polcalc::rotation_jones(theta_deg)) * m *
           polcalc::jones_to_mueller(polcalc::rotation_jones(-theta_deg));
}

/// Kraus operators of one sample of the family at `theta_deg`. Mueller
/// samples go through their Choi matrix and are refused when non-physical.
inline std::vector<JonesMatrix> sample_kraus(const SampleFamily& family, double theta_deg) {
    if (const auto* e = std::get_if<PolElement>(&family.base)) {
        PolElement rotated = *e;
        rotated.theta_deg = theta_deg;
        return {polcalc::element_jones(rotated)};
    }
    const auto& m = std::get<MuellerMatrix>(family.base);
    auto choi = polcalc::mueller_to_choi(rotate_mueller(m, theta_deg));
    if (!choi.physical)
        throw DomainError("sample family '" + family.label + "' has a non-physical Mueller matrix");
    return choi.kraus;
}

/// Sample followed by the probe elements (traversal order).
inline ProbeTransform make_probe(const std::vector<JonesMatrix>& sample,
                                 const Elements& probe_elements) {
    const JonesMatrix pp = probe_elements.empty()
                               ? JonesMatrix::Identity()
                               : polcalc::compose(probe_elements);
    ProbeTransform t;
    t.kraus.reserve(sample.size());
    for (const auto& k : sample) t.kraus.push_back(pp * k);
    return t;
}

struct HeraldedState {
    JonesMatrix rho_r;
    double herald_prob = 0.0;
};

/// rho_r = sum_k tr_signal[(K_k (x) 1) rho0 (K_k (x) 1)^dagger].
inline HeraldedState heralded_idler(const qstate::TwoQubitDensity& rho0,
                                    const ProbeTransform& probe) {
    const JonesMatrix id = JonesMatrix::Identity();
    Matrix4c acc = Matrix4c::Zero();
    for (const auto& k : probe.kraus) {
        const Matrix4c a = kron(k, id);
        acc += a * rho0.matrix() * a.adjoint();
    }
    HeraldedState out{qstate::partial_trace(acc, qstate::Subsystem::signal), 0.0};
    out.herald_prob = out.rho_r.trace().real();
    return out;
}

struct Coincidence {
    double joint = 0.0;
    double herald_prob = 0.0;

    /// joint / herald_prob, the heralded idler-projection expectation.
    double conditional() const {
        if (!(herald_prob > 1e-12)) throw UnheraldableError();
        return joint / herald_prob;
    }
};

inline Coincidence coincidence_probability(const qstate::TwoQubitDensity& rho0,
                                           const ProbeTransform& probe,
                                           const JonesMatrix& idler_projector) {
    Coincidence c;
    const JonesMatrix id = JonesMatrix::Identity();
    for (const auto& k : probe.kraus) {
        const Matrix4c joint = kron(k, idler_projector);
        const Matrix4c herald = kron(k, id);
        c.joint += (joint * rho0.matrix() * joint.adjoint()).trace().real();
        c.herald_prob += (herald * rho0.matrix() * herald.adjoint()).trace().real();
    }
    return c;
}

using ResponsePoint = Eigen::VectorXd;

struct CurveSample {
    double theta_deg = 0.0;
    ResponsePoint point;
};

struct ResponseCurve {
    std::string family;
    std::vector<CurveSample> samples;

    std::size_t dimension() const { return samples.empty() ? 0 : samples.front().point.size(); }
};

enum class Coordinates { joint, conditional };

/// Integer-degree grid [start, stop) with the given step.
inline std::vector<double> angle_grid(double step_deg = 1.0, double start = 0.0, double stop = 180.0) {
    if (!(step_deg > 0.0)) throw DomainError("grid step must be positive");
    std::vector<double> g;
    for (int i = 0;; ++i) {
        const double t = start + i * step_deg;
        if (t >= stop - 1e-9) break;
        g.push_back(t);
    }
    return g;
}

/// Raw (pre-normalization) response of every sample of `family`.
inline ResponseCurve sweep_family(const qstate::TwoQubitDensity& rho0, const SampleFamily& family,
                                  const std::vector<double>& theta_grid,
                                  const Elements& probe_elements,
                                  const std::vector<Elements>& projectors,
                                  Coordinates mode = Coordinates::joint) {
    if (theta_grid.empty()) throw DomainError("sweep_family: empty angle grid");
    if (projectors.empty()) throw DomainError("sweep_family: no idler projectors");
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        if (!std::isfinite(theta_grid[i])) throw DomainError("sweep_family: non-finite angle");
        if (i > 0 && !(theta_grid[i] > theta_grid[i - 1]))
            throw DomainError("sweep_family: angles must be strictly increasing");
    }
    std::vector<JonesMatrix> proj;
    for (const auto& p : projectors) proj.push_back(polcalc::compose(p));

    ResponseCurve curve{family.label, {}};
    curve.samples.reserve(theta_grid.size());
    for (double theta : theta_grid) {
        const ProbeTransform probe = make_probe(sample_kraus(family, theta), probe_elements);
        ResponsePoint pt(static_cast<Eigen::Index>(proj.size()));
        for (std::size_t n = 0; n < proj.size(); ++n) {
            const Coincidence c = coincidence_probability(rho0, probe, proj[n]);
            pt(static_cast<Eigen::Index>(n)) = mode == Coordinates::joint ? c.joint : c.conditional();
        }
        curve.samples.push_back({theta, std::move(pt)});
    }
    return curve;
}

inline double dataset_max(const std::vector<ResponseCurve>& curves) {
    double m = 0.0;
    for (const auto& c : curves)
        for (const auto& s : c.samples)
            if (s.point.size() > 0) m = std::max(m, s.point.maxCoeff());
    return m;
}

/// Divides every coordinate of every curve by the single global maximum.
inline std::vector<ResponseCurve> normalize_dataset(std::vector<ResponseCurve> curves) {
    const double m = dataset_max(curves);
    if (!(m > 0.0)) throw DomainError("normalize_dataset: dataset has no positive value");
    for (auto& c : curves)
        for (auto& s : c.samples) s.point /= m;
    return curves;
}

}  // namespace ghostpol::ghost
