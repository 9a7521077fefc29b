#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace evabs {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed XML or XES structure. Line and column are 1-based; 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line == 0 ? what
                        : what + " (line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// An attribute value that does not match its declared type.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Input data violating a precondition (non-alternating series, missing labels, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (unknown process, missing subprocess, bad counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked outside its contract, e.g. firing a disabled transition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A Petri net playout that deadlocked in a non-final marking.
class PlayoutError : public Error {
 public:
  using Error::Error;
};

/// Too little or degenerate data for an estimator.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite objective or gradient during minimization.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

/// Model file with wrong version or corrupted content.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

/// Collector for non-fatal conditions (neutral feature values, dangling sensor starts, ...).
struct Diagnostics {
  std::vector<std::string> messages;

  void note(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const noexcept { return messages.empty(); }
};

inline void note(Diagnostics* diagnostics, std::string message) {
  if (diagnostics != nullptr) diagnostics->note(std::move(message));
}

}  // namespace evabs
