#pragma once

#include <array>
#include <cmath>

#include "ad/jet.hpp"
#include "errors.hpp"
#include "geom/surface.hpp"

namespace geopinn {

// Operators on the round unit S^2 for a field u given as a smooth ambient
// function on R^3 (the embedding-architecture representation). On r = 1 the
// intrinsic Laplacian of the restriction is, for any smooth extension,
//   Lap_{S^2} u = tr(Hess) - p^T Hess p - 2 p . grad,
// and the intrinsic gradient is the tangential projection of the ambient one.

template <class S>
void require_on_sphere(const std::array<double, 3>& p) {
    const double r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    if (std::abs(r2 - 1.0) > 2e-10)
        throw ConfigError(ConfigError::Kind::Range, "point is not on the unit sphere");
}

template <class S>
S laplace_beltrami_sphere(const Jet<S, 3>& u, const std::array<double, 3>& point) {
    require_on_sphere<S>(point);
    S trace = u.h(0, 0) + u.h(1, 1) + u.h(2, 2);
    S radial2 = S(0.0);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            radial2 += S(point[std::size_t(i)] * point[std::size_t(j)]) * u.h(i, j);
    S radial1 = S(0.0);
    for (int i = 0; i < 3; ++i) radial1 += S(point[std::size_t(i)]) * u.grad[std::size_t(i)];
    return trace - radial2 - S(2.0) * radial1;
}

// Tangential part of the ambient gradient at p.
template <class S>
Vec3<S> sphere_gradient(const Jet<S, 3>& u, const std::array<double, 3>& p) {
    S radial = S(0.0);
    for (int i = 0; i < 3; ++i) radial += S(p[std::size_t(i)]) * u.grad[std::size_t(i)];
    Vec3<S> out;
    for (int i = 0; i < 3; ++i)
        out[std::size_t(i)] = u.grad[std::size_t(i)] - S(p[std::size_t(i)]) * radial;
    return out;
}

} // namespace geopinn
