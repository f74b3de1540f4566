#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace h2spec {

// Failures that map to exit code 3 in the command line tool.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pivot fell below the breakdown tolerance during an LDL factorization.
class Breakdown : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ShiftHitEigenvalue : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InertiaUnstable : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NotInInterval : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class IncompleteSpectrum : public NumericalError {
 public:
  IncompleteSpectrum(const std::string& what, std::vector<int> unresolved)
      : NumericalError(what), unresolved_(std::move(unresolved)) {}
  const std::vector<int>& unresolved() const noexcept { return unresolved_; }

 private:
  std::vector<int> unresolved_;
};

// The dense eigenvalue oracle refuses matrices above its size cap.
class OracleTooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace h2spec
