#pragma once

#include <stdexcept>
#include <string>

namespace dgsense {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad call-site arguments (sizes, ranges, enum names).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Structurally invalid on-disk artifacts (missing manifest, bad JSON).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// On-disk artifacts whose sizes disagree with their declared shapes.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Tensor contents violating value invariants (NaN/Inf, label range).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Segmentation or projection found no signal activity.
class NoActivityError : public Error {
 public:
  using Error::Error;
};

/// Input outside the mathematical domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Object used before it reached a valid state (e.g. untrained generator).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A runtime invariant the training loop relies on was broken.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace dgsense
