#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ad/tape.hpp"
#include "net/param_store.hpp"

namespace geopinn {

struct NetworkConfig {
    std::vector<int> hidden;
    std::string features = "auto";  // auto | identity | fourier | harmonics
    int fourier_order = 4;
    int harmonic_degree = 3;
};

struct TrainingConfig {
    long long epochs = 1000;
    int batch = 1024;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batches_per_epoch = 1;
    int eval_batch = 4096;
    long long eval_every = 50;
    long long checkpoint_every = 0;  // 0: only the final checkpoint
};

// Ordered (name, value) pairs so trace files keep stable columns.
struct TermValues {
    std::vector<std::pair<std::string, double>> items;

    void add(std::string name, double value) {
        items.emplace_back(std::move(name), value);
    }
    double get(const std::string& name) const {
        for (const auto& [k, v] : items)
            if (k == name) return v;
        throw std::logic_error("unknown loss term '" + name + "'");
    }
    bool has(const std::string& name) const {
        for (const auto& [k, v] : items)
            if (k == name) return true;
        return false;
    }
};

// One geometric optimization problem: owns its networks and knows how to
// compute its loss terms with exact parameter gradients, how to evaluate
// held-out metrics and diagnostics, and how to export its artifacts.
class Problem {
public:
    virtual ~Problem() = default;

    virtual std::string kind() const = 0;
    virtual ParameterStore& store() = 0;
    virtual const ParameterStore& store() const = 0;

    // One optimizer batch at the given epoch. Samples are drawn from `seed`,
    // gradients of the weighted objective are accumulated into `acc`.
    virtual TermValues train_batch(long long epoch, std::uint64_t seed, int workers,
                                   GradientAccumulator& acc) = 0;

    // Held-out losses plus problem diagnostics, evaluated without a tape.
    virtual TermValues evaluate(std::uint64_t seed, int batch, int workers) = 0;

    virtual std::vector<std::string> train_columns() const = 0;
    virtual std::vector<std::string> eval_columns() const = 0;

    virtual void diagnose(std::ostream& out, const std::filesystem::path& out_dir,
                          std::uint64_t seed, int batch, int workers) = 0;

    // what: "mesh" | "field" | "coefficients" depending on the problem.
    virtual void export_artifact(const std::string& what, const std::filesystem::path& out_dir,
                                 int resolution, int batch, std::uint64_t seed) = 0;
};

} // namespace geopinn
