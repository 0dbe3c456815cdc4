#pragma once

#include <cmath>

#include "errors.hpp"

namespace geopinn {

// Plain-double overloads of the scalar vocabulary shared by double, Var and
// Jet. Generic geometry/network code calls these unqualified; overload
// resolution picks the double, tape or jet version.

inline double value_of(double x) { return x; }

inline double sin(double x) { return std::sin(x); }
inline double cos(double x) { return std::cos(x); }
inline double exp(double x) { return std::exp(x); }
inline double tanh(double x) { return std::tanh(x); }

inline double log(double x) {
    if (!(x > 0.0)) throw NumericDomainError("log", x);
    return std::log(x);
}

inline double sqrt(double x) {
    if (!(x >= 0.0)) throw NumericDomainError("sqrt", x);
    return std::sqrt(x);
}

inline double pow_int(double x, int k) {
    if (x == 0.0 && k < 0) throw NumericDomainError("pow_int", x);
    double r = 1.0;
    double base = k < 0 ? 1.0 / x : x;
    int n = k < 0 ? -k : k;
    while (n > 0) {
        if (n & 1) r *= base;
        base *= base;
        n >>= 1;
    }
    return r;
}

inline constexpr double kAbsSmoothEps = 1e-12;

// |x| regularized as sqrt(x^2 + eps^2); twice differentiable everywhere.
inline double abs_smooth(double x) {
    return std::sqrt(x * x + kAbsSmoothEps * kAbsSmoothEps);
}

// log(1 + e^x), overflow-safe.
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double sq(double x) { return x * x; }

} // namespace geopinn
