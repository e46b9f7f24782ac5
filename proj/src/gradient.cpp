#include "flowmi/nn/gradient.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "flowmi/error.hpp"

namespace flowmi::nn {

ParameterVector gradient(const Objective& objective, const ParameterVector& params) {
    Tape tape;
    tape.leaf_block(params.values());
    std::vector<Rev> leaves(static_cast<std::size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) leaves[static_cast<std::size_t>(i)] = Rev{&tape, Tape::Var{i}};

    const Rev root = objective(tape, leaves);
    const double value = root.value();
    if (!std::isfinite(value)) throw TrainError("gradient: objective evaluated to non-finite value " + std::to_string(value));

    tape.backward(root.v);

    ParameterVector g(params.layout_ptr());
    auto out = g.values();
    for (int i = 0; i < params.size(); ++i) out[static_cast<std::size_t>(i)] = tape.adjoint(Tape::Var{i});
    return g;
}

} // namespace flowmi::nn
