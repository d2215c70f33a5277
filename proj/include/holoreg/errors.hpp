#ifndef HOLOREG_ERRORS_HPP
#define HOLOREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace holoreg {

// Error categories map onto the CLI exit codes (2, 3, 4).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace holoreg

#endif
