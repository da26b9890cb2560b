#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mokd {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Shape/length mismatch between operands.
class DimensionError : public Error {
public:
  using Error::Error;
};

// Input outside the mathematical domain of the operation (e.g. log of a
// non-positive loss).
class DomainError : public Error {
public:
  using Error::Error;
};

// Numerically degenerate instance: rank-deficient matrix, vanishing
// denominator.
class DegeneracyError : public Error {
public:
  using Error::Error;
};

// Iterative solver hit its iteration cap; carries the best iterate found.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, std::vector<double> best_iterate)
      : Error(what), best(std::move(best_iterate)) {}
  std::vector<double> best;
};

// Invalid run configuration (bad key, bad range, unparsable file).
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace mokd
