#include "flowmi/nn/adam.hpp"

#include <cmath>
#include <string>

#include "flowmi/error.hpp"

namespace flowmi::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size())
        throw ConfigError("adam_step: parameter/gradient/state sizes disagree");
    for (double g : grads)
        if (!std::isfinite(g)) throw TrainError("adam_step: non-finite gradient value " + std::to_string(g));

    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);

    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        const double g = grads[i];
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
        const double mhat = m / c1;
        const double vhat = v / c2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }

    for (double p : params)
        if (!std::isfinite(p)) throw TrainError("adam_step: parameters became non-finite");
}

void adam_step(ParameterVector& params, const ParameterVector& grads, AdamState& state, const AdamConfig& cfg) {
    if (!params.same_layout(grads)) throw ConfigError("adam_step: gradient layout does not match parameters");
    adam_step(params.values(), grads.values(), state, cfg);
}

} // namespace flowmi::nn
