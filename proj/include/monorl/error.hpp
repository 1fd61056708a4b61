#ifndef MONORL_ERROR_HPP_
#define MONORL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace monorl {

// Shape mismatch between what an operation expects and what it was given.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, long expected, long actual)
      : std::invalid_argument(what + ": expected " + std::to_string(expected) +
                              ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  long expected() const { return expected_; }
  long actual() const { return actual_; }

 private:
  long expected_;
  long actual_;
};

// A configuration value failed schema validation (unknown key, bad type,
// out-of-range value).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace monorl

#endif  // MONORL_ERROR_HPP_
