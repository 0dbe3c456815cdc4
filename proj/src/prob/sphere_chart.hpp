#pragma once

#include <array>
#include <cmath>

#include "ad/jet.hpp"
#include "errors.hpp"
#include "geom/linalg.hpp"

namespace geopinn {

// Two-ball atlas on S^n. Each patch is the open unit ball, reached from the
// sphere by composing stereographic projection with the radial map that
// sends geodesic polar angle theta to ball radius rho = tan(theta/4). The
// chart transition between the two patches is then
//   x~ = tau(x) = ((|x| - 1) / (|x| (|x| + 1))) x,
// an involution that maps |x| = rho to |x~| = (1 - rho)/(1 + rho).

// tau in generic arithmetic (jets give the exact Jacobian for free).
template <class T, int N>
std::array<T, N> transition_map(const std::array<T, N>& x) {
    T t = x[0] * x[0];
    for (int i = 1; i < N; ++i) t += x[std::size_t(i)] * x[std::size_t(i)];
    const double tv = value_of(t);
    if (tv <= 1e-12)
        throw NumericDomainError("transition_map near patch pole", std::sqrt(tv));
    if (tv >= 1.0)
        throw NumericDomainError("transition_map outside unit ball", std::sqrt(tv));
    const T rho = sqrt(t);
    const T coef = (rho - T(1.0)) / (rho * (rho + T(1.0)));
    std::array<T, N> out;
    for (int i = 0; i < N; ++i) out[std::size_t(i)] = coef * x[std::size_t(i)];
    return out;
}

template <int N>
std::array<double, N> transition_point(const std::array<double, N>& x) {
    return transition_map<double, N>(x);
}

// Exact Jacobian d(x~)/dx from jet gradients.
template <int N>
Mat<double, N> transition_jacobian(const std::array<double, N>& x) {
    const auto seeds = jet_seed<double, N>(x);
    const auto image = transition_map<Jet<double, N>, N>(seeds);
    Mat<double, N> jac;
    for (int a = 0; a < N; ++a)
        for (int b = 0; b < N; ++b) jac(a, b) = image[std::size_t(a)].grad[std::size_t(b)];
    return jac;
}

// Round metric of the radius-R sphere pulled back through this chart. With
// t = |x|^2 the unit-sphere metric is
//   g_ij = a(t) delta_ij + b(t) x_i x_j,
//   a(t) = 16 (1 - t)^2 / (1 + t)^4,   b(t) = 64 / (1 + t)^4,
// which follows from theta = 4 arctan(rho). Scaling by R^2 gives the
// radius-R sphere; Ric(g) = (n-1)/R^2 g, so lambda = +1 needs R^2 = n - 1
// for n >= 3 and the unit sphere for n = 2.
template <int N>
double einstein_reference_radius_sq() {
    return N == 2 ? 1.0 : double(N - 1);
}

template <class T, int N>
Mat<T, N> round_metric_reference(const std::array<T, N>& x, double radius_sq) {
    T t = x[0] * x[0];
    for (int i = 1; i < N; ++i) t += x[std::size_t(i)] * x[std::size_t(i)];
    if (value_of(t) >= 1.0)
        throw NumericDomainError("round metric outside unit ball", std::sqrt(value_of(t)));
    const T one_m = T(1.0) - t;
    const T one_p = T(1.0) + t;
    const T p2 = one_p * one_p;
    const T p4 = p2 * p2;
    const T a = T(16.0 * radius_sq) * one_m * one_m / p4;
    const T b = T(64.0 * radius_sq) / p4;
    Mat<T, N> g;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
            g(i, j) = b * x[std::size_t(i)] * x[std::size_t(j)];
            if (i == j) g(i, j) += a;
        }
    return g;
}

// Metric entries as jets over the ball coordinates, packed lower triangle
// (same layout the vielbein head produces).
template <int N>
std::array<Jet<double, N>, N*(N + 1) / 2> round_metric_jets(const std::array<double, N>& x,
                                                            double radius_sq) {
    const auto seeds = jet_seed<double, N>(x);
    const auto g = round_metric_reference<Jet<double, N>, N>(seeds, radius_sq);
    std::array<Jet<double, N>, N*(N + 1) / 2> packed;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j)
            packed[std::size_t(i * (i + 1) / 2 + j)] = g(i, j);
    return packed;
}

} // namespace geopinn
