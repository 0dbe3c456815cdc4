#pragma once

#include <array>
#include <cmath>

#include "ad/jet.hpp"
#include "errors.hpp"

namespace geopinn {

template <class S>
using Vec3 = std::array<S, 3>;

template <class S>
S dot3(const Vec3<S>& a, const Vec3<S>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class S>
Vec3<S> cross3(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]};
}

inline constexpr double kDegenerateNormal = 1e-10;

// Position and derivatives of a surface map at one parameter point,
// extracted from the slots of the three coordinate jets.
template <class S>
struct ImmersionSample {
    Vec3<S> phi, phi_u, phi_v, phi_uu, phi_uv, phi_vv;

    static ImmersionSample from_jets(const std::array<Jet<S, 2>, 3>& jets) {
        ImmersionSample s;
        for (int c = 0; c < 3; ++c) {
            const auto& j = jets[std::size_t(c)];
            s.phi[std::size_t(c)] = j.value;
            s.phi_u[std::size_t(c)] = j.grad[0];
            s.phi_v[std::size_t(c)] = j.grad[1];
            s.phi_uu[std::size_t(c)] = j.h(0, 0);
            s.phi_uv[std::size_t(c)] = j.h(0, 1);
            s.phi_vv[std::size_t(c)] = j.h(1, 1);
        }
        return s;
    }
};

template <class S>
struct FirstForm {
    S E, F, G;
};

template <class S>
struct SecondForm {
    S L, M, N;
};

template <class S>
FirstForm<S> first_fundamental(const ImmersionSample<S>& s) {
    return {dot3(s.phi_u, s.phi_u), dot3(s.phi_u, s.phi_v), dot3(s.phi_v, s.phi_v)};
}

// EG - F^2 equals |phi_u x phi_v|^2 (Lagrange identity); the degeneracy
// test below uses it to avoid forming the cross product twice.
template <class S>
S area_element_sq(const FirstForm<S>& I) {
    return I.E * I.G - I.F * I.F;
}

template <class S>
bool immersion_degenerate(const FirstForm<S>& I) {
    return !(value_of(area_element_sq(I)) > kDegenerateNormal * kDegenerateNormal);
}

template <class S>
S area_element(const FirstForm<S>& I) {
    const double w2 = value_of(area_element_sq(I));
    if (w2 < -1e-12)
        throw std::logic_error("negative EG - F^2; broken first fundamental form");
    if (w2 <= 0.0) return S(0.0);
    return sqrt(area_element_sq(I));
}

template <class S>
Vec3<S> unit_normal(const ImmersionSample<S>& s) {
    const Vec3<S> c = cross3(s.phi_u, s.phi_v);
    const S norm_sq = dot3(c, c);
    if (!(value_of(norm_sq) > kDegenerateNormal * kDegenerateNormal))
        throw DegenerateImmersionError("vanishing phi_u x phi_v");
    const S inv = S(1.0) / sqrt(norm_sq);
    return {c[0] * inv, c[1] * inv, c[2] * inv};
}

template <class S>
SecondForm<S> second_fundamental(const ImmersionSample<S>& s, const Vec3<S>& normal) {
    return {dot3(s.phi_uu, normal), dot3(s.phi_uv, normal), dot3(s.phi_vv, normal)};
}

template <class S>
S mean_curvature(const FirstForm<S>& I, const SecondForm<S>& II) {
    const S denom_sq = area_element_sq(I);
    if (!(value_of(denom_sq) > 1e-12))
        throw DegenerateImmersionError("near-degenerate EG - F^2 in mean curvature");
    return (I.E * II.N - S(2.0) * I.F * II.M + I.G * II.L) / (S(2.0) * denom_sq);
}

template <class S>
S gauss_curvature(const FirstForm<S>& I, const SecondForm<S>& II) {
    const S denom_sq = area_element_sq(I);
    if (!(value_of(denom_sq) > 1e-12))
        throw DegenerateImmersionError("near-degenerate EG - F^2 in gauss curvature");
    return (II.L * II.N - II.M * II.M) / denom_sq;
}

} // namespace geopinn
