#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ad/jet.hpp"
#include "errors.hpp"
#include "net/param_store.hpp"

namespace geopinn {

// Ping-pong buffers so a forward pass does no steady-state allocation.
template <class V>
struct MLPWork {
    std::vector<V> a, b;
};

// Affine layer: out[j] = b_j + sum_k W[j,k] * in[k]. V is a jet or a bare
// scalar; the parameters enter through the reader as constants-in-inputs.
template <class Reader, class V>
void affine_layer(const Reader& reader, const LayerLayout& layer,
                  const std::vector<V>& in, std::vector<V>& out) {
    out.assign(std::size_t(layer.out), V());
    for (int j = 0; j < layer.out; ++j) {
        const std::size_t row = layer.weights.offset + std::size_t(j) * std::size_t(layer.in);
        V acc = in[0] * reader(row);
        for (int k = 1; k < layer.in; ++k)
            acc += in[std::size_t(k)] * reader(row + std::size_t(k));
        acc += V(reader(layer.biases.offset + std::size_t(j)));
        out[std::size_t(j)] = acc;
    }
}

// Feed-forward pass: tanh on hidden layers, linear final layer. Throws a
// numeric-domain error naming the layer if an output goes non-finite.
template <class Reader, class V>
void mlp_forward(const Reader& reader, const NetLayout& net,
                 const std::vector<V>& features, std::vector<V>& out, MLPWork<V>& work) {
    if (features.size() != std::size_t(net.config.input_width))
        throw ConfigError(ConfigError::Kind::Range, "feature width does not match mlp input");
    const std::vector<V>* cur = &features;
    std::vector<V>* bufs[2] = {&work.a, &work.b};
    int which = 0;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        std::vector<V>* next = bufs[which];
        which ^= 1;
        affine_layer(reader, net.layers[l], *cur, *next);
        if (l + 1 != net.layers.size())
            for (V& x : *next) x = tanh(x);
        for (const V& x : *next)
            if (!std::isfinite(value_of(x)))
                throw NumericDomainError("mlp layer " + std::to_string(l), value_of(x));
        cur = next;
    }
    out = *cur;
}

} // namespace geopinn
