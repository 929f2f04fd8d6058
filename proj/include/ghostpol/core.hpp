#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ghostpol {

using cd = std::complex<double>;

// Basis order (H, V).
using JonesMatrix = Eigen::Matrix2cd;
// Stokes order (S0, S1, S2, S3).
using MuellerMatrix = Eigen::Matrix4d;
using StokesVector = Eigen::Vector4d;
// Two-qubit operators in (HH, HV, VH, VV) order, signal photon first.
using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;

/// Base of every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
struct DomainError : Error {
    using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Reduces an angle into [0, 180).
inline double wrap_180(double deg) {
    double r = std::fmod(deg, 180.0);
    if (r < 0.0) r += 180.0;
    if (r >= 180.0) r -= 180.0;
    return r;
}

inline Matrix4c kron(const JonesMatrix& a, const JonesMatrix& b) {
    Matrix4c out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

}  // namespace ghostpol
