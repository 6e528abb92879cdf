#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fermi {

enum class ErrorKind {
  UnparsableNumber,
  UnknownUnit,
  NonFiniteValue,
  DivisionByZero,
  DimensionMismatch,
  SyntaxError,
  DuplicateDefinition,
  UndefinedReference,
  CyclicDependency,
  MissingRoot,
  InvalidGold,
  EmptyInput,
  IoError,
  SchemaError,
  DimensionError,
  NoEligibleObjects,
  SlotCollision,
  NoPivotObject,
  KbTooSmall,
  InsufficientPool,
  UsageError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnparsableNumber: return "UnparsableNumber";
    case ErrorKind::UnknownUnit: return "UnknownUnit";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::DuplicateDefinition: return "DuplicateDefinition";
    case ErrorKind::UndefinedReference: return "UndefinedReference";
    case ErrorKind::CyclicDependency: return "CyclicDependency";
    case ErrorKind::MissingRoot: return "MissingRoot";
    case ErrorKind::InvalidGold: return "InvalidGold";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::NoEligibleObjects: return "NoEligibleObjects";
    case ErrorKind::SlotCollision: return "SlotCollision";
    case ErrorKind::NoPivotObject: return "NoPivotObject";
    case ErrorKind::KbTooSmall: return "KbTooSmall";
    case ErrorKind::InsufficientPool: return "InsufficientPool";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Unknown";
}

// Every toolkit failure carries a kind and, where it makes sense, a location
// (an identifier such as "Q3", a "line:col" pair, or an object name).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string location = {})
      : std::runtime_error(message), kind_(kind), location_(std::move(location)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& location() const noexcept { return location_; }

 private:
  ErrorKind kind_;
  std::string location_;
};

}  // namespace fermi
