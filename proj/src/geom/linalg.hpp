#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "ad/scalar.hpp"
#include "errors.hpp"

namespace geopinn {

template <class V, int N>
struct Mat {
    std::array<V, std::size_t(N) * std::size_t(N)> e{};

    V& operator()(int i, int j) { return e[std::size_t(i) * N + std::size_t(j)]; }
    const V& operator()(int i, int j) const { return e[std::size_t(i) * N + std::size_t(j)]; }

    static Mat identity() {
        Mat m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) m(i, j) = V(i == j ? 1.0 : 0.0);
        return m;
    }
};

// Gauss-Jordan with partial pivoting on |value|. Works for doubles, jets and
// tape scalars; a vanishing pivot means the metric is numerically singular.
template <class V, int N>
Mat<V, N> mat_inverse(const Mat<V, N>& in, double singular_tol = 1e-14) {
    Mat<V, N> a = in;
    Mat<V, N> inv = Mat<V, N>::identity();
    for (int col = 0; col < N; ++col) {
        int pivot = col;
        double best = std::abs(value_of(a(col, col)));
        for (int r = col + 1; r < N; ++r) {
            const double cand = std::abs(value_of(a(r, col)));
            if (cand > best) {
                best = cand;
                pivot = r;
            }
        }
        if (!(best > singular_tol))
            throw DegenerateMetricError("singular matrix in inversion");
        if (pivot != col)
            for (int j = 0; j < N; ++j) {
                std::swap(a(pivot, j), a(col, j));
                std::swap(inv(pivot, j), inv(col, j));
            }
        const V d = a(col, col);
        for (int j = 0; j < N; ++j) {
            a(col, j) = a(col, j) / d;
            inv(col, j) = inv(col, j) / d;
        }
        for (int r = 0; r < N; ++r) {
            if (r == col) continue;
            const V f = a(r, col);
            if (value_of(f) == 0.0) continue;
            for (int j = 0; j < N; ++j) {
                a(r, j) = a(r, j) - f * a(col, j);
                inv(r, j) = inv(r, j) - f * inv(col, j);
            }
        }
    }
    return inv;
}

// Cholesky of a symmetric positive definite double matrix; returns false if
// a pivot is non-positive. Used by tests and by the harmonic least-squares.
template <int N>
bool cholesky(const Mat<double, N>& a, Mat<double, N>& lower) {
    lower = Mat<double, N>{};
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            if (i == j) {
                if (!(s > 0.0)) return false;
                lower(i, i) = std::sqrt(s);
            } else {
                lower(i, j) = s / lower(j, j);
            }
        }
    }
    return true;
}

template <class V, int N>
V frobenius_sq(const Mat<V, N>& m) {
    V s = m(0, 0) * m(0, 0);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (i != 0 || j != 0) s += m(i, j) * m(i, j);
    return s;
}

} // namespace geopinn
