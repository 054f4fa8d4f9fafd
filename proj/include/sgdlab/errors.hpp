#pragma once

#include <stdexcept>
#include <string>

namespace sgdlab {

// Thrown when an estimator or fit has too few usable inputs. The CLI maps
// this to exit code 4.
struct insufficient_data_error : std::runtime_error {
    explicit insufficient_data_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a computation produced non-finite values. The CLI maps this
// to exit code 3.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid arguments use std::invalid_argument; the CLI maps config-level
// validation failures to exit code 2.

}  // namespace sgdlab
