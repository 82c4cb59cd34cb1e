#pragma once

#include <stdexcept>
#include <string>

namespace fcucr {

// Bad or inconsistent configuration. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data, bad bundle, out-of-range ids. Exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& block, const std::string& what)
      : std::runtime_error(what + " (block: " + block + ")"), block_(block) {}
  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

// Violations of the server/client protocol (duplicate KB keys, empty rounds).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace fcucr
