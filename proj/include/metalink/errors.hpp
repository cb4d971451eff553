#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metalink {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wrong shapes, non-scalar objectives, mismatched layouts.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value was violated (out-of-range message,
// sigma >= 1, empty pilot set, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A forward value became NaN or Inf. Carries the id of the graph node that
// produced it.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t node)
      : Error(what), node_(node) {}
  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace metalink
