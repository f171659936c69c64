#pragma once

#include <stdexcept>
#include <string>

namespace bisimkit {

// Invalid or unknown configuration; the CLI maps it to exit code 2.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite loss or network output; the CLI maps it to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Throws NumericalError naming the quantity when value is NaN or infinite.
void require_finite(double value, const std::string& what);

}  // namespace bisimkit
