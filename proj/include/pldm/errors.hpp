#pragma once

#include <stdexcept>
#include <string>

namespace pldm {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Vector or matrix dimensions disagree with the declared problem structure.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// A problem list with zero agents was supplied.
struct EmptyNetwork : Error {
  using Error::Error;
};

/// A callable produced NaN or infinity.
struct NonFiniteValue : Error {
  using Error::Error;
};

/// Problem or instance parameters violate a documented invariant.
struct InvalidParams : Error {
  using Error::Error;
};

/// A global coordinate has no agent holding a copy of it.
struct EmptyCopySet : Error {
  using Error::Error;
};

/// The proximal step would be solved with a non-positive determinant.
struct SingularStep : Error {
  using Error::Error;
};

/// The backtracking loop exhausted its retry budget.
struct LinesearchStall : Error {
  using Error::Error;
};

/// The requested rate parameter admits no real step-size interval.
struct InfeasibleNu : Error {
  using Error::Error;
};

/// The constraint-stack smallest singular value is zero (no usable theta).
struct ZeroRegularity : Error {
  using Error::Error;
};

/// Fewer recorded iterations than the operation needs.
struct InsufficientHistory : Error {
  using Error::Error;
};

/// The gap-to-limit sequence grows in its tail; the trace is unusable for
/// rate fitting.
struct NonMonotoneTail : Error {
  using Error::Error;
};

/// The multistart baseline found no point meeting the feasibility tolerance.
struct NoFeasiblePointFound : Error {
  using Error::Error;
};

/// A config file could not be read or tokenized.  Carries a 1-based line
/// number when the offending line is known.
struct ParseError : Error {
  explicit ParseError(const std::string& msg, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_number(line) {}
  int line_number = 0;
};

/// A config parsed fine but violates a documented invariant.
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace pldm
