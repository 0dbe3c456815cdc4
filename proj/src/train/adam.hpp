#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "errors.hpp"

namespace geopinn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard Adam with bias correction. Steps with non-finite gradients are
// skipped (and counted) rather than poisoning the parameters.
class Adam {
public:
    Adam(std::size_t n, const AdamConfig& cfg)
        : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    // Returns false if the step was skipped because of non-finite gradients.
    bool step(std::vector<double>& params, const std::vector<double>& grads) {
        if (params.size() != m_.size() || grads.size() != m_.size())
            throw ConfigError(ConfigError::Kind::Range, "optimizer/parameter size mismatch");
        for (double g : grads)
            if (!std::isfinite(g)) {
                ++skipped_;
                ++step_count_;
                return false;
            }
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        return true;
    }

    long long step_count() const { return step_count_; }
    long long skipped() const { return skipped_; }
    const AdamConfig& config() const { return cfg_; }

    std::vector<double>& first_moment() { return m_; }
    std::vector<double>& second_moment() { return v_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }
    void restore(std::vector<double> m, std::vector<double> v, long long steps) {
        m_ = std::move(m);
        v_ = std::move(v);
        step_count_ = steps;
    }

private:
    AdamConfig cfg_;
    std::vector<double> m_, v_;
    long long step_count_ = 0;
    long long skipped_ = 0;
};

} // namespace geopinn
