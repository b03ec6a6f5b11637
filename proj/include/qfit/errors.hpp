#pragma once

#include <stdexcept>
#include <string>

namespace qfit {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2,
// DataError -> 3, NumericalError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : DataError {
    explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

struct DomainError : DataError {
    explicit DomainError(const std::string& msg) : DataError(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qfit
