#pragma once

#include <stdexcept>
#include <string>

namespace qel {

// exit code 2: the input configuration is malformed or out of scope
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// exit code 1: an iteration failed to converge within its budget
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// exit code 3: an internal identity that must hold exactly has failed
struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qel
