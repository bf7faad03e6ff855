#ifndef RARECC_ERRORS_HPP
#define RARECC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rarecc {

// Bad user input: shapes, ranges, unknown names. CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values or a numerically impossible state reached at runtime.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Violated internal assumption (a bug, not user input).
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace rarecc

#endif  // RARECC_ERRORS_HPP
