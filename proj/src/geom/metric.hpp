#pragma once

#include <array>
#include <cmath>

#include "ad/jet.hpp"
#include "errors.hpp"
#include "geom/linalg.hpp"

namespace geopinn {

// Metric data at one point: g, its inverse, and first and second coordinate
// derivatives. dg[k](i,j) = d_k g_ij; second derivatives are packed over the
// symmetric pair (k,l) with the same triangle indexing the jets use, so the
// (k,l)/(l,k) symmetry is structural.
template <class S, int N>
struct MetricSample {
    static constexpr int kPairs = N * (N + 1) / 2;

    Mat<S, N> g;
    Mat<S, N> g_inv;
    std::array<Mat<S, N>, N> dg;
    std::array<Mat<S, N>, kPairs> ddg;

    static constexpr int pidx(int k, int l) {
        return k >= l ? k * (k + 1) / 2 + l : l * (l + 1) / 2 + k;
    }
    const Mat<S, N>& ddg_at(int k, int l) const { return ddg[std::size_t(pidx(k, l))]; }

    // Builds the sample from the packed lower triangle of jet-valued metric
    // entries (index (i,j), j <= i, at i*(i+1)/2+j).
    static MetricSample from_jets(const std::array<Jet<S, N>, kPairs>& packed) {
        MetricSample m;
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                const Jet<S, N>& gij = packed[std::size_t(Jet<S, N>::hidx(i, j))];
                m.g(i, j) = gij.value;
                for (int k = 0; k < N; ++k) m.dg[std::size_t(k)](i, j) = gij.grad[std::size_t(k)];
                for (int k = 0; k < N; ++k)
                    for (int l = 0; l <= k; ++l)
                        m.ddg[std::size_t(pidx(k, l))](i, j) = gij.h(k, l);
            }
        m.g_inv = mat_inverse(m.g);
        return m;
    }
};

// Christoffel symbols of the second kind, Gamma[k](i,j) = Gamma^k_ij.
template <class S, int N>
std::array<Mat<S, N>, N> christoffel(const MetricSample<S, N>& m) {
    std::array<Mat<S, N>, N> gamma;
    for (int k = 0; k < N; ++k)
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) {
                S acc = S(0.0);
                for (int l = 0; l < N; ++l) {
                    const S term = m.dg[std::size_t(i)](j, l) + m.dg[std::size_t(j)](i, l) -
                                   m.dg[std::size_t(l)](i, j);
                    acc += m.g_inv(k, l) * term;
                }
                gamma[std::size_t(k)](i, j) = S(0.5) * acc;
            }
    return gamma;
}

template <class S, int N>
struct RicciResult {
    Mat<S, N> ricci;       // symmetrized, (R + R^T)/2
    double asymmetry = 0;  // max |R_jk - R_kj| before symmetrization
};

// Ricci tensor from the coordinate formula
//   R_jk = d_i Gamma^i_jk - d_j Gamma^i_ki + Gamma^i_ip Gamma^p_jk
//        - Gamma^i_jp Gamma^p_ik,
// with that exact index placement. Floating-point evaluation is not
// manifestly symmetric, so the result is symmetrized and the residual
// asymmetry reported as a correctness diagnostic.
template <class S, int N>
RicciResult<S, N> ricci(const MetricSample<S, N>& m) {
    const auto gamma = christoffel(m);

    // d_m g^{kl} = -g^{ka} (d_m g_ab) g^{bl}
    std::array<Mat<S, N>, N> dginv;
    for (int mm = 0; mm < N; ++mm)
        for (int k = 0; k < N; ++k)
            for (int l = 0; l < N; ++l) {
                S acc = S(0.0);
                for (int a = 0; a < N; ++a)
                    for (int b = 0; b < N; ++b)
                        acc += m.g_inv(k, a) * m.dg[std::size_t(mm)](a, b) * m.g_inv(b, l);
                dginv[std::size_t(mm)](k, l) = -acc;
            }

    // d_m Gamma^k_ij
    const auto dgamma = [&](int mm, int k, int i, int j) {
        S acc = S(0.0);
        for (int l = 0; l < N; ++l) {
            const S term = m.dg[std::size_t(i)](j, l) + m.dg[std::size_t(j)](i, l) -
                           m.dg[std::size_t(l)](i, j);
            const S dterm = m.ddg_at(mm, i)(j, l) + m.ddg_at(mm, j)(i, l) -
                            m.ddg_at(mm, l)(i, j);
            acc += dginv[std::size_t(mm)](k, l) * term + m.g_inv(k, l) * dterm;
        }
        return S(0.5) * acc;
    };

    Mat<S, N> r;
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
            S acc = S(0.0);
            for (int i = 0; i < N; ++i) acc += dgamma(i, i, j, k);
            for (int i = 0; i < N; ++i) acc -= dgamma(j, i, k, i);
            for (int i = 0; i < N; ++i)
                for (int p = 0; p < N; ++p)
                    acc += gamma[std::size_t(i)](i, p) * gamma[std::size_t(p)](j, k) -
                           gamma[std::size_t(i)](j, p) * gamma[std::size_t(p)](i, k);
            r(j, k) = acc;
        }

    RicciResult<S, N> out;
    for (int j = 0; j < N; ++j)
        for (int k = 0; k < N; ++k) {
            out.ricci(j, k) = S(0.5) * (r(j, k) + r(k, j));
            const double asym = std::abs(value_of(r(j, k)) - value_of(r(k, j)));
            if (asym > out.asymmetry) out.asymmetry = asym;
        }
    return out;
}

} // namespace geopinn
