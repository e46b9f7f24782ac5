#pragma once

#include <string>

#include "flowmi/flow/flow.hpp"

namespace flowmi::flow {

// Text snapshot of a flow: versioned header, config, standardizers, then one
// named tensor per block with shape and hex-float payload (bit-exact round
// trip). Debugging aid for reproducibility questions.
void save_snapshot(const ConditionalFlow& flow, const std::string& path);

ConditionalFlow load_snapshot(const std::string& path);

} // namespace flowmi::flow
