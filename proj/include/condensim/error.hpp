#ifndef CONDENSIM_ERROR_HPP
#define CONDENSIM_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace condensim {

enum class ErrorKind {
  // chain_core
  Reducible,
  NotInvariant,
  NonPositiveMeasure,
  InvalidRates,
  SingularSystem,
  SubsetTooSmall,
  BadExponents,
  // zrp_engine
  NotLattice,
  BadInitial,
  // diffusion_engine
  ZeroCoordinate,
  StepBlowup,
  NonSimplexStart,
  // experiments
  IncompletePath,
  EmptyInput,
  MismatchedChains,
  EmptyRegion,
  // cli_io
  SchemaError,
  RangeError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Reducible: return "Reducible";
    case ErrorKind::NotInvariant: return "NotInvariant";
    case ErrorKind::NonPositiveMeasure: return "NonPositiveMeasure";
    case ErrorKind::InvalidRates: return "InvalidRates";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::SubsetTooSmall: return "SubsetTooSmall";
    case ErrorKind::BadExponents: return "BadExponents";
    case ErrorKind::NotLattice: return "NotLattice";
    case ErrorKind::BadInitial: return "BadInitial";
    case ErrorKind::ZeroCoordinate: return "ZeroCoordinate";
    case ErrorKind::StepBlowup: return "StepBlowup";
    case ErrorKind::NonSimplexStart: return "NonSimplexStart";
    case ErrorKind::IncompletePath: return "IncompletePath";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::MismatchedChains: return "MismatchedChains";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace condensim

#endif  // CONDENSIM_ERROR_HPP
