#pragma once

#include <array>
#include <cmath>

#include "errors.hpp"

namespace geopinn {

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr int kMaxHarmonicDegree = 4;

// Real orthonormal spherical harmonics, ell <= 4, as the homogeneous
// harmonic polynomials restricted to the unit sphere. Normalization is
// integral of Y^2 over S^2 equal to 1 with the unnormalized measure
// (total mass 4*pi); the unit tests pin this down by quadrature.
//
// Works for any scalar type T that supports +,-,*: doubles, jets over chart
// angles, jets over ambient coordinates, or tape scalars. Because the
// polynomials are genuinely harmonic, the same expressions serve both as
// network features and as ambient extensions with exact sphere Laplacians.
template <class T>
T real_sh(int ell, int m, const T& x, const T& y, const T& z) {
    // sqrt() on doubles only; coefficients are compile-time constants.
    static const double c00 = 0.5 / std::sqrt(kPi);
    static const double c1 = std::sqrt(3.0 / (4.0 * kPi));
    static const double c2a = 0.5 * std::sqrt(15.0 / kPi);
    static const double c20 = 0.25 * std::sqrt(5.0 / kPi);
    static const double c22 = 0.25 * std::sqrt(15.0 / kPi);
    static const double c3m3 = 0.25 * std::sqrt(35.0 / (2.0 * kPi));
    static const double c3m2 = 0.5 * std::sqrt(105.0 / kPi);
    static const double c3m1 = 0.25 * std::sqrt(21.0 / (2.0 * kPi));
    static const double c30 = 0.25 * std::sqrt(7.0 / kPi);
    static const double c32 = 0.25 * std::sqrt(105.0 / kPi);
    static const double c4m4 = 0.75 * std::sqrt(35.0 / kPi);
    static const double c4m3 = 0.75 * std::sqrt(35.0 / (2.0 * kPi));
    static const double c4m2 = 0.75 * std::sqrt(5.0 / kPi);
    static const double c4m1 = 0.75 * std::sqrt(5.0 / (2.0 * kPi));
    static const double c40 = 3.0 / (16.0 * std::sqrt(kPi));
    static const double c42 = 0.375 * std::sqrt(5.0 / kPi);
    static const double c44 = 3.0 / 16.0 * std::sqrt(35.0 / kPi);

    const T xx = x * x, yy = y * y, zz = z * z;
    const T rr = xx + yy + zz;  // equals 1 on the sphere; kept for harmonicity

    switch (ell) {
    case 0:
        return T(c00);
    case 1:
        if (m == -1) return T(c1) * y;
        if (m == 0) return T(c1) * z;
        if (m == 1) return T(c1) * x;
        break;
    case 2:
        if (m == -2) return T(c2a) * x * y;
        if (m == -1) return T(c2a) * y * z;
        if (m == 0) return T(c20) * (T(2.0) * zz - xx - yy);
        if (m == 1) return T(c2a) * x * z;
        if (m == 2) return T(c22) * (xx - yy);
        break;
    case 3:
        if (m == -3) return T(c3m3) * y * (T(3.0) * xx - yy);
        if (m == -2) return T(c3m2) * x * y * z;
        if (m == -1) return T(c3m1) * y * (T(4.0) * zz - xx - yy);
        if (m == 0) return T(c30) * z * (T(2.0) * zz - T(3.0) * xx - T(3.0) * yy);
        if (m == 1) return T(c3m1) * x * (T(4.0) * zz - xx - yy);
        if (m == 2) return T(c32) * z * (xx - yy);
        if (m == 3) return T(c3m3) * x * (xx - T(3.0) * yy);
        break;
    case 4:
        if (m == -4) return T(c4m4) * x * y * (xx - yy);
        if (m == -3) return T(c4m3) * y * z * (T(3.0) * xx - yy);
        if (m == -2) return T(c4m2) * x * y * (T(7.0) * zz - rr);
        if (m == -1) return T(c4m1) * y * z * (T(7.0) * zz - T(3.0) * rr);
        if (m == 0)
            return T(c40) * (T(35.0) * zz * zz - T(30.0) * zz * rr + T(3.0) * rr * rr);
        if (m == 1) return T(c4m1) * x * z * (T(7.0) * zz - T(3.0) * rr);
        if (m == 2) return T(c42) * (xx - yy) * (T(7.0) * zz - rr);
        if (m == 3) return T(c4m3) * x * z * (xx - T(3.0) * yy);
        if (m == 4) return T(c44) * (xx * xx - T(6.0) * xx * yy + yy * yy);
        break;
    default:
        break;
    }
    throw ConfigError(ConfigError::Kind::Range,
                      "spherical harmonic (ell,m) out of supported range");
}

// All Y_{ell,m} for ell <= lmax in lexicographic (ell, m) order, m = -ell..ell.
template <class T, class Out>
void real_sh_all(int lmax, const T& x, const T& y, const T& z, Out&& emit) {
    if (lmax < 0 || lmax > kMaxHarmonicDegree)
        throw ConfigError(ConfigError::Kind::Range, "harmonic degree out of range");
    for (int ell = 0; ell <= lmax; ++ell)
        for (int m = -ell; m <= ell; ++m) emit(real_sh(ell, m, x, y, z));
}

} // namespace geopinn
