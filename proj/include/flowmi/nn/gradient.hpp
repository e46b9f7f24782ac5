#pragma once

#include <functional>
#include <span>

#include "flowmi/nn/param.hpp"
#include "flowmi/nn/tape.hpp"

namespace flowmi::nn {

// A scalar objective built from parameter leaves on a caller-provided tape.
using Objective = std::function<Rev(Tape&, std::span<const Rev>)>;

// Reverse-mode gradient of `objective` with respect to every scalar in
// `params`. Throws TrainError if the objective value is non-finite.
ParameterVector gradient(const Objective& objective, const ParameterVector& params);

} // namespace flowmi::nn
