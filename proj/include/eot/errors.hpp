#pragma once

#include <stdexcept>
#include <string>

namespace eot {

enum class ErrorCode {
  InvalidExtent,
  DegenerateSupport,
  InvalidModel,
  InvalidConfig,
  NumericalFailure,
  NoExistence,
  TooLarge,
  ParseError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidExtent: return "InvalidExtent";
    case ErrorCode::DegenerateSupport: return "DegenerateSupport";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::NoExistence: return "NoExistence";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Base exception for everything thrown by the library. The code lets
/// callers (the CLI in particular) map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by the replay reader; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A numerical failure at a specific tracker frame.
class FrameFailure : public Error {
 public:
  FrameFailure(std::size_t frame, const std::string& what)
      : Error(ErrorCode::NumericalFailure, "frame " + std::to_string(frame) + ": " + what),
        frame_(frame) {}

  [[nodiscard]] std::size_t frame() const noexcept { return frame_; }

 private:
  std::size_t frame_;
};

}  // namespace eot
