#pragma once

#include <stdexcept>
#include <string>

namespace ccdm {

// Error taxonomy. The CLI maps ConfigError to exit code 2 and every other
// Error to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct ContractError : Error {
    using Error::Error;
};
struct IngestError : Error {
    using Error::Error;
};
struct TrainingError : Error {
    using Error::Error;
};
struct SamplingError : Error {
    using Error::Error;
};
struct ModelError : Error {
    using Error::Error;
};

inline constexpr const char* kToolVersion = "ccdm 0.1.0";

} // namespace ccdm
