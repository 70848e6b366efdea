#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace infspec {

enum class ErrorKind {
  SelfIntersection,
  ZeroArea,
  DuplicateVertex,
  TooFewVertices,
  InvalidPartition,
  EmptyTarget,
  ApexOutside,
  NonUnitNormal,
  OptimizationStalled,
  InvalidStadium,
  BadParameters,
  MeshFailure,
  ZeroField,
  LinearSolveFailure,
  NonConvergence,
  DegenerateSign,
  PreconditionViolation,
  DomainFileError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind plus the module that raised it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& message)
      : std::runtime_error(std::string(module) + ": " + std::string(to_string(kind)) + ": " +
                           message),
        kind_(kind),
        module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SelfIntersection: return "SelfIntersection";
    case ErrorKind::ZeroArea: return "ZeroArea";
    case ErrorKind::DuplicateVertex: return "DuplicateVertex";
    case ErrorKind::TooFewVertices: return "TooFewVertices";
    case ErrorKind::InvalidPartition: return "InvalidPartition";
    case ErrorKind::EmptyTarget: return "EmptyTarget";
    case ErrorKind::ApexOutside: return "ApexOutside";
    case ErrorKind::NonUnitNormal: return "NonUnitNormal";
    case ErrorKind::OptimizationStalled: return "OptimizationStalled";
    case ErrorKind::InvalidStadium: return "InvalidStadium";
    case ErrorKind::BadParameters: return "BadParameters";
    case ErrorKind::MeshFailure: return "MeshFailure";
    case ErrorKind::ZeroField: return "ZeroField";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateSign: return "DegenerateSign";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::DomainFileError: return "DomainFileError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace infspec
