#pragma once

#include <stdexcept>
#include <string>

namespace dhrn {

enum class ErrorKind {
  UnreadableFile,
  FormatMismatch,
  EmptySignal,
  NonFiniteSample,
  ClassTooSmall,
  AlreadySplit,
  SignalShorterThanWindow,
  NonFiniteInput,
  FactorTooLarge,
  ShapeMismatch,
  EmptyOutput,
  DegenerateBatch,
  WindowLargerThanInput,
  LabelOutOfRange,
  LengthMismatch,
  IndexOutOfRange,
  EmptyMatrix,
  InvalidConfig,
  InvalidSpec,
  CorruptCheckpoint,
  VersionMismatch,
  EmptySplit,
  DivergenceDetected,
  StaleCache,
  UnknownKey,
  IoFailure,
};

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::UnreadableFile: return "UnreadableFile";
    case ErrorKind::FormatMismatch: return "FormatMismatch";
    case ErrorKind::EmptySignal: return "EmptySignal";
    case ErrorKind::NonFiniteSample: return "NonFiniteSample";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::AlreadySplit: return "AlreadySplit";
    case ErrorKind::SignalShorterThanWindow: return "SignalShorterThanWindow";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::FactorTooLarge: return "FactorTooLarge";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyOutput: return "EmptyOutput";
    case ErrorKind::DegenerateBatch: return "DegenerateBatch";
    case ErrorKind::WindowLargerThanInput: return "WindowLargerThanInput";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::DivergenceDetected: return "DivergenceDetected";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace dhrn
