#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace coneflow {

// Error taxonomy. Every throwing path in the library uses one of these so the
// CLI can map failures onto exit codes without string matching.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// input violates a documented precondition (zero-norm point, |yhat|>1, ...)
struct DegenerateInputError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
// malformed file / config contents (bad magic, unknown keys, schema breaks)
struct FormatError : Error { using Error::Error; };
// data/init fails one of the separation/margin assumptions
struct AssumptionFailedError : Error { using Error::Error; };
struct GenerationFailedError : Error { using Error::Error; };
// combinatorial size guard tripped
struct SizeGuardError : Error { using Error::Error; };
// bad CLI invocation (missing file, unknown flag) -> exit code 2
struct UsageError : Error { using Error::Error; };

inline constexpr double kPi = 3.14159265358979323846;

// exp-unit overflow guard for the exponential loss; above this we abort the
// run instead of silently producing inf
inline constexpr double kExpAbortThreshold = 700.0;

// %.17g round-trips IEEE doubles and is byte-stable for a given libc, which is
// what keeps repeated runs byte-identical at the artifact level.
std::string fmt_g17(double x);
std::string fmt_g6(double x);

// angle helpers used by the 2-D margin machinery
double wrap_2pi(double a);                 // into [0, 2*pi)
double angular_distance(double a, double b); // shortest distance, in [0, pi]

}  // namespace coneflow
