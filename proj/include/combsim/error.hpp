#pragma once

#include <stdexcept>
#include <string>

namespace combsim {

// Base of every error raised by the library. Each failure mode named in the
// module contracts gets its own type so callers (and the CLI exit-code map)
// can dispatch on it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class MismatchedGrids : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class DenominatorTooSmall : public Error {
 public:
  using Error::Error;
};

class LayerCountMismatch : public Error {
 public:
  using Error::Error;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class InfeasibleWindow : public Error {
 public:
  using Error::Error;
};

class BoundViolated : public Error {
 public:
  using Error::Error;
};

class HypothesisViolatedByPerturbation : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& message)
      : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace combsim
