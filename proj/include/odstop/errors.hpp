#pragma once

#include <stdexcept>
#include <string>

namespace odstop {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Expression syntax / lookup / domain failures.
class ExprError : public Error {
 public:
  enum class Kind { Syntax, UnknownIdentifier, Arity, Domain };

  ExprError(Kind kind, std::size_t position, const std::string& what)
      : Error(label(kind) + " at position " + std::to_string(position) + ": " + what),
        kind_(kind),
        position_(position) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

 private:
  static std::string label(Kind k) {
    switch (k) {
      case Kind::Syntax: return "syntax error";
      case Kind::UnknownIdentifier: return "unknown identifier";
      case Kind::Arity: return "arity mismatch";
      case Kind::Domain: return "domain error";
    }
    return "error";
  }

  Kind kind_;
  std::size_t position_;
};

/// Problem validation failures, carrying the offending location.
class ValidationError : public Error {
 public:
  enum class Kind {
    InvalidInterval,
    NonPositiveSigma,
    RateBelowFloor,
    LocalIntegrabilityFailure,
    NegativeReward,
    InvalidBreakpoints,
    InvalidConfig
  };

  ValidationError(Kind kind, double lo, double hi, const std::string& what)
      : Error(what), kind_(kind), lo_(lo), hi_(hi) {}

  Kind kind() const noexcept { return kind_; }
  /// Offending point (lo == hi) or subinterval.
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

 private:
  Kind kind_;
  double lo_;
  double hi_;
};

/// Numerical failures of the grid / ODE / potential machinery.
class NumericalError : public Error {
 public:
  enum class Kind {
    TruncationFailure,
    OverflowInExponent,
    NonConvergence,
    MonotonicityViolation,
    OutOfSpan,
    DegenerateBracket,
    IntegrabilityFailure,
    UnboundedRatio,
    HullDegeneracy,
    AbsorbingValueMissing,
    NegativeCandidate,
    StepSizeUnstable
  };

  NumericalError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The value function is infinite (the reward outgrows phi or psi).
class InfiniteValue : public Error {
 public:
  InfiniteValue(double limA, double limB)
      : Error("value function is infinite (limA=" + std::to_string(limA) +
              ", limB=" + std::to_string(limB) + ")"),
        limA_(limA),
        limB_(limB) {}

  double limA() const noexcept { return limA_; }
  double limB() const noexcept { return limB_; }

 private:
  double limA_;
  double limB_;
};

}  // namespace odstop
