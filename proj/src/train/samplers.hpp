#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "train/rng.hpp"

namespace geopinn {

// I.i.d. uniform direction on S^2 from normalized Gaussian triples.
inline std::array<double, 3> sample_unit_sphere(Rng& rng) {
    for (;;) {
        std::array<double, 3> p{rng.normal(), rng.normal(), rng.normal()};
        const double n2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        if (n2 > 1e-12) {
            const double inv = 1.0 / std::sqrt(n2);
            return {p[0] * inv, p[1] * inv, p[2] * inv};
        }
    }
}

inline std::vector<std::array<double, 3>> sample_sphere_batch(int batch, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::array<double, 3>> out(static_cast<std::size_t>(batch));
    for (auto& p : out) p = sample_unit_sphere(rng);
    return out;
}

// Uniform in the ball of the given radius, rejection from the cube.
template <int N>
std::array<double, N> sample_ball(Rng& rng, double radius) {
    for (;;) {
        std::array<double, N> x;
        double n2 = 0.0;
        for (int i = 0; i < N; ++i) {
            x[std::size_t(i)] = rng.uniform(-radius, radius);
            n2 += x[std::size_t(i)] * x[std::size_t(i)];
        }
        if (n2 < radius * radius) return x;
    }
}

// Uniform in the annulus r_lo < |x| < r_hi (as a subset of the ball).
template <int N>
std::array<double, N> sample_annulus(Rng& rng, double r_lo, double r_hi) {
    for (;;) {
        const auto x = sample_ball<N>(rng, r_hi);
        double n2 = 0.0;
        for (int i = 0; i < N; ++i) n2 += x[std::size_t(i)] * x[std::size_t(i)];
        if (n2 > r_lo * r_lo) return x;
    }
}

// Radius uniform in (0, radius), direction uniform: oversamples the patch
// pole relative to the volume measure. Collocation points for residual
// training, where the pole region would otherwise be starved.
template <int N>
std::array<double, N> sample_ball_radial(Rng& rng, double radius) {
    for (;;) {
        std::array<double, N> dir;
        double n2 = 0.0;
        for (int i = 0; i < N; ++i) {
            dir[std::size_t(i)] = rng.normal();
            n2 += dir[std::size_t(i)] * dir[std::size_t(i)];
        }
        if (n2 <= 1e-12) continue;
        const double rho = radius * rng.uniform();
        const double scale = rho / std::sqrt(n2);
        for (int i = 0; i < N; ++i) dir[std::size_t(i)] *= scale;
        return dir;
    }
}

} // namespace geopinn
