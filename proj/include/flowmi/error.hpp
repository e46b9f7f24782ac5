#pragma once

#include <stdexcept>
#include <string>

namespace flowmi {

// Error taxonomy for the whole library. The CLI maps these onto exit codes:
// config/data/domain/contract -> 2 (usage or bad input), train/numeric -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct TrainError : Error {
    using Error::Error;
};
struct NumericError : Error {
    using Error::Error;
};

} // namespace flowmi
