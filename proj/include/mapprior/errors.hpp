#pragma once

#include <stdexcept>
#include <string>

namespace mapprior {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 2, DataError/FormatError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A trained-model capability is missing (untrained net, absent one-step head).
struct CapabilityError : ConfigError {
    explicit CapabilityError(const std::string& msg) : ConfigError(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content; carries the byte offset of the defect.
struct FormatError : DataError {
    FormatError(const std::string& msg, std::size_t offset)
        : DataError(msg + " (at offset " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};

struct ShapeError : DataError {
    explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

// NaN/Inf encountered where the training contract forbids it.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace mapprior
