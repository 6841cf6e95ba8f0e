#pragma once

#include <stdexcept>
#include <string>

namespace burst {

/// Base class for all recoverable errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A timestamp falls outside the span covered by a gyro trace.
struct OutOfRange : Error {
  using Error::Error;
};

/// Numerical integration produced non-finite values.
struct NonFiniteResult : Error {
  using Error::Error;
};

/// Fewer interest points than the minimum needed downstream (low texture,
/// low light, or an empty search window).
struct TooFewFeatures : Error {
  using Error::Error;
};

/// Point configuration cannot constrain a homography (collinear points,
/// rank-deficient system, or no consensus set).
struct DegenerateConfiguration : Error {
  using Error::Error;
};

/// A covariance matrix failed its Cholesky factorization even after jitter.
struct CovarianceNotPsd : Error {
  using Error::Error;
};

/// Perspective division by a vanishing denominator.
struct PointAtInfinity : Error {
  using Error::Error;
};

/// A plane normal deviates from unit length beyond tolerance.
struct NonUnitNormal : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// A simulated camera pose would sample outside the scene plane.
struct ExcursionTooLarge : Error {
  using Error::Error;
};

/// Malformed input file; the message carries file/line context.
struct InputFormat : Error {
  using Error::Error;
};

}  // namespace burst
