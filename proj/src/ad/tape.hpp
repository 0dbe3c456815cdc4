#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "ad/scalar.hpp"
#include "errors.hpp"

namespace geopinn {

class Tape;

// Reverse-mode scalar. A Var is either a constant (no tape node) or a handle
// into a Tape. Only first derivatives are tracked here; second derivatives
// with respect to inputs live in Jet, which is instantiated over Var during
// training so that curvature formulas stay differentiable in the parameters.
class Var {
public:
    Var() = default;
    Var(double v) : val_(v) {}   // implicit: constants enter expressions freely

    double value() const { return val_; }
    bool is_const() const { return idx_ < 0; }
    Tape* tape() const { return tape_; }
    int index() const { return idx_; }

private:
    friend class Tape;
    Var(double v, int idx, Tape* tape) : val_(v), idx_(idx), tape_(tape) {}

    double val_ = 0.0;
    int idx_ = -1;
    Tape* tape_ = nullptr;
};

inline double value_of(const Var& x) { return x.value(); }

// Flat per-parameter gradient buffer aligned with a ParameterStore layout.
// backward() scatters into it; after accumulating N per-sample losses the
// caller either scales by 1/N or seeds backward with the weight directly.
class GradientAccumulator {
public:
    GradientAccumulator() = default;
    explicit GradientAccumulator(std::size_t n) : grads_(n, 0.0) {}

    std::vector<double>& grads() { return grads_; }
    const std::vector<double>& grads() const { return grads_; }
    long long sample_count() const { return sample_count_; }

    void add_sample() { ++sample_count_; }

    void scale(double s) {
        for (double& g : grads_) g *= s;
    }

    // Merging happens in ascending worker-index order; see parallel.hpp.
    void merge(const GradientAccumulator& other) {
        assert(grads_.size() == other.grads_.size());
        for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
        sample_count_ += other.sample_count_;
    }

    void reset() {
        std::fill(grads_.begin(), grads_.end(), 0.0);
        sample_count_ = 0;
    }

private:
    std::vector<double> grads_;
    long long sample_count_ = 0;
};

// Recording context for one worker. Nodes store at most two parents with the
// local partials evaluated at record time. rewind() keeps capacity, so the
// steady-state cost of a sample is a handful of vector writes per op.
class Tape {
public:
    Var leaf(double value, int param_index) {
        const int idx = push(0.0, 0.0, -1, -1);
        param_leaves_.emplace_back(idx, param_index);
        return Var(value, idx, this);
    }

    Var unary(double value, const Var& a, double pa) {
        if (a.is_const()) return Var(value);
        return Var(value, push(pa, 0.0, a.idx_, -1), this);
    }

    Var binary(double value, const Var& a, double pa, const Var& b, double pb) {
        if (a.is_const() && b.is_const()) return Var(value);
        if (b.is_const()) return Var(value, push(pa, 0.0, a.idx_, -1), this);
        if (a.is_const()) return Var(value, push(pb, 0.0, b.idx_, -1), this);
        return Var(value, push(pa, pb, a.idx_, b.idx_), this);
    }

    std::size_t size() const { return nodes_.size(); }

    void rewind() {
        nodes_.clear();
        param_leaves_.clear();
    }

    // Reverse sweep from `loss`, scattering d(seed * loss)/d(theta_k) into
    // acc. The tape is consumed (rewound) afterwards.
    void backward(const Var& loss, GradientAccumulator& acc, double seed = 1.0) {
        if (loss.is_const()) {
            acc.add_sample();
            rewind();
            return;
        }
        assert(loss.tape_ == this);
        adjoint_.assign(nodes_.size(), 0.0);
        adjoint_[static_cast<std::size_t>(loss.idx_)] = seed;
        for (int i = loss.idx_; i >= 0; --i) {
            const double adj = adjoint_[static_cast<std::size_t>(i)];
            if (adj == 0.0) continue;
            const Node& nd = nodes_[static_cast<std::size_t>(i)];
            if (nd.a >= 0) adjoint_[static_cast<std::size_t>(nd.a)] += nd.pa * adj;
            if (nd.b >= 0) adjoint_[static_cast<std::size_t>(nd.b)] += nd.pb * adj;
        }
        for (const auto& [node, param] : param_leaves_)
            acc.grads()[static_cast<std::size_t>(param)] +=
                adjoint_[static_cast<std::size_t>(node)];
        acc.add_sample();
        rewind();
    }

private:
    struct Node {
        double pa, pb;
        int a, b;
    };

    int push(double pa, double pb, int a, int b) {
        nodes_.push_back(Node{pa, pb, a, b});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    std::vector<std::pair<int, int>> param_leaves_; // (node index, param index)
    std::vector<double> adjoint_;
};

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
    Tape* t = a.tape() ? a.tape() : b.tape();
    assert(!a.tape() || !b.tape() || a.tape() == b.tape());
    return t;
}
} // namespace detail

inline Var operator+(const Var& a, const Var& b) {
    if (a.is_const() && b.is_const()) return Var(a.value() + b.value());
    return detail::tape_of(a, b)->binary(a.value() + b.value(), a, 1.0, b, 1.0);
}

inline Var operator-(const Var& a, const Var& b) {
    if (a.is_const() && b.is_const()) return Var(a.value() - b.value());
    return detail::tape_of(a, b)->binary(a.value() - b.value(), a, 1.0, b, -1.0);
}

inline Var operator*(const Var& a, const Var& b) {
    if (a.is_const() && b.is_const()) return Var(a.value() * b.value());
    return detail::tape_of(a, b)->binary(a.value() * b.value(), a, b.value(), b, a.value());
}

inline Var operator/(const Var& a, const Var& b) {
    if (b.value() == 0.0) throw NumericDomainError("div", b.value());
    const double v = a.value() / b.value();
    if (a.is_const() && b.is_const()) return Var(v);
    return detail::tape_of(a, b)->binary(v, a, 1.0 / b.value(), b, -v / b.value());
}

inline Var operator-(const Var& a) {
    if (a.is_const()) return Var(-a.value());
    return a.tape()->unary(-a.value(), a, -1.0);
}

inline Var& operator+=(Var& a, const Var& b) { a = a + b; return a; }
inline Var& operator-=(Var& a, const Var& b) { a = a - b; return a; }
inline Var& operator*=(Var& a, const Var& b) { a = a * b; return a; }

inline Var sin(const Var& a) {
    if (a.is_const()) return Var(std::sin(a.value()));
    return a.tape()->unary(std::sin(a.value()), a, std::cos(a.value()));
}

inline Var cos(const Var& a) {
    if (a.is_const()) return Var(std::cos(a.value()));
    return a.tape()->unary(std::cos(a.value()), a, -std::sin(a.value()));
}

inline Var exp(const Var& a) {
    const double e = std::exp(a.value());
    if (a.is_const()) return Var(e);
    return a.tape()->unary(e, a, e);
}

inline Var log(const Var& a) {
    if (!(a.value() > 0.0)) throw NumericDomainError("log", a.value());
    if (a.is_const()) return Var(std::log(a.value()));
    return a.tape()->unary(std::log(a.value()), a, 1.0 / a.value());
}

inline Var sqrt(const Var& a) {
    if (!(a.value() >= 0.0)) throw NumericDomainError("sqrt", a.value());
    const double s = std::sqrt(a.value());
    if (a.is_const()) return Var(s);
    return a.tape()->unary(s, a, s > 0.0 ? 0.5 / s : 0.0);
}

inline Var tanh(const Var& a) {
    const double t = std::tanh(a.value());
    if (a.is_const()) return Var(t);
    return a.tape()->unary(t, a, 1.0 - t * t);
}

inline Var pow_int(const Var& a, int k) {
    const double v = pow_int(a.value(), k);
    if (a.is_const()) return Var(v);
    const double dp = k == 0 ? 0.0 : k * pow_int(a.value(), k - 1);
    return a.tape()->unary(v, a, dp);
}

inline Var abs_smooth(const Var& a) {
    const double s = abs_smooth(a.value());
    if (a.is_const()) return Var(s);
    return a.tape()->unary(s, a, a.value() / s);
}

inline Var softplus(const Var& a) {
    const double v = softplus(a.value());
    if (a.is_const()) return Var(v);
    return a.tape()->unary(v, a, sigmoid(a.value()));
}

inline Var sq(const Var& a) { return a * a; }

} // namespace geopinn
