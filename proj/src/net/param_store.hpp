#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ad/tape.hpp"
#include "errors.hpp"
#include "train/rng.hpp"

namespace geopinn {

struct MLPConfig {
    int input_width = 0;
    std::vector<int> hidden;
    int output_width = 0;

    void validate() const {
        if (input_width < 1 || output_width < 1)
            throw ConfigError(ConfigError::Kind::Range, "mlp widths must be >= 1");
        if (hidden.empty())
            throw ConfigError(ConfigError::Kind::Range, "mlp needs at least one hidden layer");
        for (int w : hidden)
            if (w < 1) throw ConfigError(ConfigError::Kind::Range, "mlp widths must be >= 1");
    }
};

struct ParamRange {
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct LayerLayout {
    int in = 0;
    int out = 0;
    ParamRange weights;  // row-major, out x in
    ParamRange biases;   // out
};

struct NetLayout {
    MLPConfig config;
    std::vector<LayerLayout> layers;
    std::size_t first = 0;
    std::size_t count = 0;
};

// Flat trainable-parameter vector shared by all networks of a problem. The
// layout (net, layer, role) -> index range is fixed at construction and
// preserved bit for bit by checkpoint round-trips.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t rng_seed = 0) : rng_seed_(rng_seed) {}

    // Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
    // init_stream defaults to the net index; passing an explicit stream lets
    // sibling networks (e.g. the two atlas patches) start from identical
    // weights.
    int add_mlp(const MLPConfig& config, int init_stream = -1) {
        config.validate();
        NetLayout net;
        net.config = config;
        net.first = values_.size();
        Rng rng(derive_seed(rng_seed_, "init",
                            init_stream >= 0 ? std::uint64_t(init_stream) : nets_.size()));
        std::vector<int> widths;
        widths.push_back(config.input_width);
        widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
        widths.push_back(config.output_width);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            LayerLayout layer;
            layer.in = widths[l];
            layer.out = widths[l + 1];
            layer.weights = {values_.size(), std::size_t(layer.in) * std::size_t(layer.out)};
            const double bound = 1.0 / std::sqrt(double(layer.in));
            for (std::size_t k = 0; k < layer.weights.size; ++k)
                values_.push_back(rng.uniform(-bound, bound));
            layer.biases = {values_.size(), std::size_t(layer.out)};
            values_.insert(values_.end(), layer.biases.size, 0.0);
            net.layers.push_back(layer);
        }
        net.count = values_.size() - net.first;
        nets_.push_back(std::move(net));
        return static_cast<int>(nets_.size()) - 1;
    }

    std::size_t size() const { return values_.size(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::uint64_t rng_seed() const { return rng_seed_; }

    const NetLayout& net(int i) const { return nets_.at(std::size_t(i)); }
    std::size_t net_count() const { return nets_.size(); }

    double param(std::size_t index) const {
        if (index >= values_.size())
            throw ConfigError(ConfigError::Kind::Range, "parameter index out of range");
        return values_[index];
    }

private:
    std::vector<double> values_;
    std::vector<NetLayout> nets_;
    std::uint64_t rng_seed_ = 0;
};

inline ParameterStore init_params(const MLPConfig& config, std::uint64_t seed) {
    ParameterStore store(seed);
    store.add_mlp(config);
    return store;
}

// Parameter readers lift stored doubles into the scalar type of a forward
// pass: plain values for evaluation, tape leaves for training.
struct ValueReader {
    const ParameterStore& store;
    using Scalar = double;
    double operator()(std::size_t index) const { return store.param(index); }
};

struct TapeReader {
    const ParameterStore& store;
    Tape& tape;
    using Scalar = Var;
    Var operator()(std::size_t index) const {
        return tape.leaf(store.param(index), static_cast<int>(index));
    }
};

// Spec surface for a single recorded parameter; bounds-checked.
inline Var param_scalar(const ParameterStore& store, std::size_t index, Tape& tape) {
    return TapeReader{store, tape}(index);
}

} // namespace geopinn
