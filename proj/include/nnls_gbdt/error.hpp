#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nnls {

/// Failure categories shared by every module. The CLI maps them to exit codes.
enum class ErrorKind {
  NonSquare,
  DimensionMismatch,
  NonFinite,
  Overflow,
  SpectralClash,
  NoConvergence,
  InvalidRange,
  InvalidParameter,
  DegenerateS,
  SingularPoint,
  SpectralPole,
  UnsupportedSeed,
  InvariantViolation,
  GridTooSmall,
  AsymmetricGrid,
  BadTau,
  RangeExceeded,
  ThetaZero,
  DegenerateCurve,
  QuadratureFailure,
  SchemaError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::SpectralClash: return "SpectralClash";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::DegenerateS: return "DegenerateS";
    case ErrorKind::SingularPoint: return "SingularPoint";
    case ErrorKind::SpectralPole: return "SpectralPole";
    case ErrorKind::UnsupportedSeed: return "UnsupportedSeed";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::AsymmetricGrid: return "AsymmetricGrid";
    case ErrorKind::BadTau: return "BadTau";
    case ErrorKind::RangeExceeded: return "RangeExceeded";
    case ErrorKind::ThetaZero: return "ThetaZero";
    case ErrorKind::DegenerateCurve: return "DegenerateCurve";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::SchemaError: return "SchemaError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised where S(x,t) is not invertible, i.e. at a blow-up point of the solution.
class SingularPointError : public Error {
 public:
  SingularPointError(double x, double t, double abs_det)
      : Error(ErrorKind::SingularPoint,
              "S(x,t) not invertible at x=" + std::to_string(x) + ", t=" + std::to_string(t) +
                  " (|det S|=" + std::to_string(abs_det) + ")"),
        x_(x), t_(t), abs_det_(abs_det) {}

  double x() const noexcept { return x_; }
  double t() const noexcept { return t_; }
  double abs_det() const noexcept { return abs_det_; }

 private:
  double x_, t_, abs_det_;
};

}  // namespace nnls
