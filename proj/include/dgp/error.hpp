#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dgp {

enum class ErrorKind {
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  TruncatedPayload,
  Io,
  InvalidShape,
  InvalidMask,
  InvalidArgument,
  DimensionMismatch,
  ShapeMismatch,
  CholeskyFailure,
  NonDivisibleResolution,
  DegenerateGrid,
  DegenerateSpec,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::UnsupportedDtype: return "unsupported-dtype";
    case ErrorKind::TruncatedPayload: return "truncated-payload";
    case ErrorKind::Io: return "io-failure";
    case ErrorKind::InvalidShape: return "invalid-shape";
    case ErrorKind::InvalidMask: return "invalid-mask";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::CholeskyFailure: return "cholesky-failure";
    case ErrorKind::NonDivisibleResolution: return "non-divisible-resolution";
    case ErrorKind::DegenerateGrid: return "degenerate-grid";
    case ErrorKind::DegenerateSpec: return "degenerate-spec";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable kind; the
/// message is prefixed with it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, long index = -1)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        detail_(what),
        index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// For cholesky-failure: 0-based index of the first leading minor that is not
  /// positive definite. -1 otherwise.
  long index() const noexcept { return index_; }

  /// True for failures of the numerics rather than of the inputs.
  bool numerical() const noexcept { return kind_ == ErrorKind::CholeskyFailure; }

  /// Same error with `context` prepended to the message, e.g. "level 1".
  Error with_context(std::string_view context) const {
    return Error(kind_, std::string(context) + ": " + detail_, index_);
  }

 private:
  ErrorKind kind_;
  std::string detail_;
  long index_;
};

}  // namespace dgp
