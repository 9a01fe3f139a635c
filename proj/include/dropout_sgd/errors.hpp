#pragma once

#include <stdexcept>
#include <string>

namespace dsgd {

// Shape mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar argument outside its admissible range (probability, order q, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition on the state or the input data is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Request exceeds a hard size cap (enumeration over 2^d masks, d^2 x d^2 solves).
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_probability(double p, const char* what) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw ParameterError(std::string(what) + ": retain probability must lie in (0,1], got " +
                         std::to_string(p));
  }
}

}  // namespace detail
}  // namespace dsgd
