#pragma once

#include <cstdint>
#include <vector>

#include "flowmi/nn/param.hpp"

namespace flowmi::nn {

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// First and second moment buffers, laid out like the parameter vector.
struct AdamState {
    std::int64_t step_count = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    explicit AdamState(int n)
        : first_moment(static_cast<std::size_t>(n), 0.0), second_moment(static_cast<std::size_t>(n), 0.0) {}
};

// One bias-corrected descent step. Deterministic; throws TrainError on a
// non-finite gradient and guarantees the updated parameters stay finite.
void adam_step(ParameterVector& params, const ParameterVector& grads, AdamState& state, const AdamConfig& cfg);

// Span flavor used by the training loops (no layout bookkeeping).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

} // namespace flowmi::nn
