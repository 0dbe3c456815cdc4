#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "ad/jet.hpp"
#include "errors.hpp"

namespace geopinn {

// Lower-triangular vielbein head: n(n+1)/2 raw network outputs become
//   L_ii = exp(raw_i)            (first n outputs, strictly positive)
//   L_ij = raw_{n + ...}, i > j  (strict lower triangle, row-major)
// and the metric is g = L^T L, symmetric positive definite for any raw
// values. Exponentiating the diagonal is what makes that literally true.
//
// Returns g packed over the lower triangle with the jet Hessian indexing
// (entry (i,j), j <= i, at i*(i+1)/2+j). V may be a jet or a bare scalar.
template <class V, int N>
std::array<V, N*(N + 1) / 2> vielbein_to_metric(const std::vector<V>& raw) {
    constexpr int kPacked = N * (N + 1) / 2;
    if (raw.size() != std::size_t(kPacked))
        throw ConfigError(ConfigError::Kind::Range, "vielbein raw width must be n(n+1)/2");

    std::array<std::array<V, N>, N> lower{};  // lower[i][j] = L_ij
    for (int i = 0; i < N; ++i) {
        lower[std::size_t(i)][std::size_t(i)] = exp(raw[std::size_t(i)]);
        if (!std::isfinite(value_of(lower[std::size_t(i)][std::size_t(i)])))
            throw NumericDomainError("vielbein exp overflow",
                                     value_of(raw[std::size_t(i)]));
    }
    int idx = N;
    for (int i = 1; i < N; ++i)
        for (int j = 0; j < i; ++j) lower[std::size_t(i)][std::size_t(j)] = raw[std::size_t(idx++)];

    std::array<V, kPacked> g;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            V acc = lower[std::size_t(i)][std::size_t(i)] * lower[std::size_t(i)][std::size_t(j)];
            for (int k = i + 1; k < N; ++k)
                acc += lower[std::size_t(k)][std::size_t(i)] * lower[std::size_t(k)][std::size_t(j)];
            g[std::size_t(i * (i + 1) / 2 + j)] = acc;
        }
    return g;
}

// log det(L^T L) = 2 * sum of diagonal raw outputs; exact and cheap, used by
// the finiteness penalty.
template <class V, int N>
V vielbein_log_det(const std::vector<V>& raw) {
    V acc = raw[0];
    for (int i = 1; i < N; ++i) acc += raw[std::size_t(i)];
    return V(2.0) * acc;
}

} // namespace geopinn
