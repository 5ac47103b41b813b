#ifndef VAPO_ERRORS_HPP_
#define VAPO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vapo {

// Invalid configuration or input data (bad prompt, unknown key, bad range).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// API misuse: shape mismatch, stepping a finished episode, empty batch.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

// Non-finite values produced during an update.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vapo

#endif  // VAPO_ERRORS_HPP_
