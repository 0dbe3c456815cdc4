#pragma once

#include <array>
#include <cstddef>
#include <type_traits>

#include "ad/scalar.hpp"
#include "ad/tape.hpp"
#include "errors.hpp"

namespace geopinn {

// Second-order forward-mode jet over up to five input coordinates: value,
// gradient and Hessian of a scalar with respect to the seeded inputs. The
// Hessian is stored as the packed lower triangle, so symmetry is structural
// (h(i,j) and h(j,i) are the same element). S is double for evaluation and
// oracles, Var during training; every slot operation then records on the
// tape, which is what makes parameter gradients of curvature losses exact.
template <class S, int N>
struct Jet {
    static_assert(N >= 1 && N <= 5, "jet dimension must be in 1..5");
    static constexpr int kDim = N;
    static constexpr int kHessSize = N * (N + 1) / 2;

    S value{};
    std::array<S, N> grad{};
    std::array<S, kHessSize> hess{};

    Jet() = default;
    Jet(const S& v) : value(v) {}   // implicit: constants lift to jets

    static constexpr int hidx(int i, int j) {
        return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
    }
    S& h(int i, int j) { return hess[static_cast<std::size_t>(hidx(i, j))]; }
    const S& h(int i, int j) const {
        return hess[static_cast<std::size_t>(hidx(i, j))];
    }
};

template <class S, int N>
double value_of(const Jet<S, N>& a) {
    return value_of(a.value);
}

// Seeds: jet i carries coords[i] with unit gradient in slot i, zero Hessian.
template <class S, int N>
std::array<Jet<S, N>, N> jet_seed(const std::array<S, N>& coords) {
    std::array<Jet<S, N>, N> out;
    for (int i = 0; i < N; ++i) {
        out[static_cast<std::size_t>(i)].value = coords[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)].grad[static_cast<std::size_t>(i)] = S(1.0);
    }
    return out;
}

template <class S, int N>
Jet<S, N> operator+(const Jet<S, N>& a, const Jet<S, N>& b) {
    Jet<S, N> r;
    r.value = a.value + b.value;
    for (int i = 0; i < N; ++i) r.grad[i] = a.grad[i] + b.grad[i];
    for (int k = 0; k < Jet<S, N>::kHessSize; ++k) r.hess[k] = a.hess[k] + b.hess[k];
    return r;
}

template <class S, int N>
Jet<S, N> operator-(const Jet<S, N>& a, const Jet<S, N>& b) {
    Jet<S, N> r;
    r.value = a.value - b.value;
    for (int i = 0; i < N; ++i) r.grad[i] = a.grad[i] - b.grad[i];
    for (int k = 0; k < Jet<S, N>::kHessSize; ++k) r.hess[k] = a.hess[k] - b.hess[k];
    return r;
}

template <class S, int N>
Jet<S, N> operator-(const Jet<S, N>& a) {
    Jet<S, N> r;
    r.value = -a.value;
    for (int i = 0; i < N; ++i) r.grad[i] = -a.grad[i];
    for (int k = 0; k < Jet<S, N>::kHessSize; ++k) r.hess[k] = -a.hess[k];
    return r;
}

template <class S, int N>
Jet<S, N> operator*(const Jet<S, N>& a, const Jet<S, N>& b) {
    Jet<S, N> r;
    r.value = a.value * b.value;
    for (int i = 0; i < N; ++i)
        r.grad[i] = a.grad[i] * b.value + a.value * b.grad[i];
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j)
            r.h(i, j) = a.h(i, j) * b.value + a.grad[i] * b.grad[j] +
                        a.grad[j] * b.grad[i] + a.value * b.h(i, j);
    return r;
}

template <class S, int N>
Jet<S, N> operator/(const Jet<S, N>& a, const Jet<S, N>& b) {
    if (value_of(b.value) == 0.0) throw NumericDomainError("div", 0.0);
    Jet<S, N> r;
    r.value = a.value / b.value;
    for (int i = 0; i < N; ++i)
        r.grad[i] = (a.grad[i] - r.value * b.grad[i]) / b.value;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j)
            r.h(i, j) = (a.h(i, j) - r.value * b.h(i, j) - r.grad[i] * b.grad[j] -
                         r.grad[j] * b.grad[i]) /
                        b.value;
    return r;
}

// Scalar (constant-in-inputs) mixed forms; cheaper than lifting to a jet.
template <class S, int N>
Jet<S, N> operator*(const S& c, const Jet<S, N>& a) {
    Jet<S, N> r;
    r.value = c * a.value;
    for (int i = 0; i < N; ++i) r.grad[i] = c * a.grad[i];
    for (int k = 0; k < Jet<S, N>::kHessSize; ++k) r.hess[k] = c * a.hess[k];
    return r;
}
template <class S, int N>
Jet<S, N> operator*(const Jet<S, N>& a, const S& c) { return c * a; }
template <class S, int N>
    requires(!std::is_same_v<S, double>)
Jet<S, N> operator*(double c, const Jet<S, N>& a) { return S(c) * a; }
template <class S, int N>
    requires(!std::is_same_v<S, double>)
Jet<S, N> operator*(const Jet<S, N>& a, double c) { return S(c) * a; }

template <class S, int N>
Jet<S, N> operator+(const Jet<S, N>& a, const S& c) {
    Jet<S, N> r = a;
    r.value = a.value + c;
    return r;
}
template <class S, int N>
Jet<S, N> operator+(const S& c, const Jet<S, N>& a) { return a + c; }
template <class S, int N>
Jet<S, N> operator-(const Jet<S, N>& a, const S& c) { return a + S(-1.0) * c; }
template <class S, int N>
Jet<S, N> operator-(const S& c, const Jet<S, N>& a) {
    Jet<S, N> r = -a;
    r.value = c + r.value;
    return r;
}

template <class S, int N>
Jet<S, N>& operator+=(Jet<S, N>& a, const Jet<S, N>& b) { a = a + b; return a; }
template <class S, int N>
Jet<S, N>& operator-=(Jet<S, N>& a, const Jet<S, N>& b) { a = a - b; return a; }

// Chain rule to second order through a univariate map with derivatives
// f0 = f(v), f1 = f'(v), f2 = f''(v).
template <class S, int N>
Jet<S, N> jet_compose(const Jet<S, N>& a, const S& f0, const S& f1, const S& f2) {
    Jet<S, N> r;
    r.value = f0;
    for (int i = 0; i < N; ++i) r.grad[i] = f1 * a.grad[i];
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j)
            r.h(i, j) = f2 * a.grad[i] * a.grad[j] + f1 * a.h(i, j);
    return r;
}

template <class S, int N>
Jet<S, N> sin(const Jet<S, N>& a) {
    const S s = sin(a.value), c = cos(a.value);
    return jet_compose(a, s, c, -s);
}

template <class S, int N>
Jet<S, N> cos(const Jet<S, N>& a) {
    const S s = sin(a.value), c = cos(a.value);
    return jet_compose(a, c, -s, -c);
}

template <class S, int N>
Jet<S, N> exp(const Jet<S, N>& a) {
    const S e = exp(a.value);
    return jet_compose(a, e, e, e);
}

template <class S, int N>
Jet<S, N> log(const Jet<S, N>& a) {
    if (!(value_of(a.value) > 0.0)) throw NumericDomainError("log", value_of(a.value));
    const S inv = S(1.0) / a.value;
    return jet_compose(a, log(a.value), inv, -inv * inv);
}

template <class S, int N>
Jet<S, N> sqrt(const Jet<S, N>& a) {
    if (!(value_of(a.value) > 0.0)) throw NumericDomainError("sqrt", value_of(a.value));
    const S s = sqrt(a.value);
    const S f1 = S(0.5) / s;
    return jet_compose(a, s, f1, S(-0.5) * f1 / a.value);
}

template <class S, int N>
Jet<S, N> tanh(const Jet<S, N>& a) {
    const S t = tanh(a.value);
    const S f1 = S(1.0) - t * t;
    return jet_compose(a, t, f1, S(-2.0) * t * f1);
}

template <class S, int N>
Jet<S, N> pow_int(const Jet<S, N>& a, int k) {
    if (value_of(a.value) == 0.0 && k < 2) {
        if (k < 0) throw NumericDomainError("pow_int", 0.0);
        // 0^0 and 0^1 still have well-defined polynomial derivatives.
    }
    const S f0 = pow_int(a.value, k);
    const S f1 = k == 0 ? S(0.0) : S(double(k)) * pow_int(a.value, k - 1);
    const S f2 = (k == 0 || k == 1) ? S(0.0)
                                    : S(double(k) * double(k - 1)) * pow_int(a.value, k - 2);
    return jet_compose(a, f0, f1, f2);
}

template <class S, int N>
Jet<S, N> abs_smooth(const Jet<S, N>& a) {
    const S s = abs_smooth(a.value);
    const S f1 = a.value / s;
    const S f2 = (S(1.0) - f1 * f1) / s;
    return jet_compose(a, s, f1, f2);
}

template <class S, int N>
Jet<S, N> sq(const Jet<S, N>& a) { return a * a; }

} // namespace geopinn
