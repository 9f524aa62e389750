#pragma once

#include <stdexcept>
#include <string>

namespace evpriv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Radial topology problem; `bus()` names the offending bus.
class TopologyError : public Error {
 public:
  TopologyError(const std::string& what, int bus) : Error(what), bus_(bus) {}
  int bus() const noexcept { return bus_; }

 private:
  int bus_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An EV whose demand cannot be met inside its power box.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace evpriv
