#pragma once

#include <stdexcept>
#include <string>

namespace mixprompt {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or configuration. The CLI maps this to exit status 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public ValidationError {
 public:
  LoadError(const std::string& what, std::size_t line)
      : ValidationError(what), line_(line) {}
  explicit LoadError(const std::string& what) : ValidationError(what) {}

  // 1-based; 0 when the error is not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class ParseErrorKind { kNoLabel, kUnknownLabel, kEmptyText };

const char* to_string(ParseErrorKind kind) noexcept;

class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& detail)
      : Error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

enum class BackendErrorKind {
  kTransport,   // connection refused, timeout, broken pipe
  kRateLimited, // HTTP 429
  kServer,      // HTTP 5xx, 408
  kAuth,        // HTTP 401/403
  kBadRequest,  // other 4xx, mock prompt rejection
  kProtocol,    // response does not follow the completions schema
};

const char* to_string(BackendErrorKind kind) noexcept;

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& what, int status = 0)
      : Error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        status_(status) {}

  BackendErrorKind kind() const noexcept { return kind_; }
  int http_status() const noexcept { return status_; }
  bool retryable() const noexcept {
    return kind_ == BackendErrorKind::kTransport ||
           kind_ == BackendErrorKind::kRateLimited ||
           kind_ == BackendErrorKind::kServer;
  }

 private:
  BackendErrorKind kind_;
  int status_;
};

// The mock backend refused a prompt that does not follow the mix template.
class MockFormatError : public BackendError {
 public:
  explicit MockFormatError(const std::string& what)
      : BackendError(BackendErrorKind::kBadRequest, "mock: " + what) {}
};

// A verbalized label token is more than one backend token.
class MultiTokenVerbalizerError : public Error {
 public:
  MultiTokenVerbalizerError(std::string candidate, std::size_t pieces)
      : Error("verbalizer token '" + candidate + "' spans " +
              std::to_string(pieces) + " backend tokens"),
        candidate_(std::move(candidate)) {}

  const std::string& candidate() const noexcept { return candidate_; }

 private:
  std::string candidate_;
};

class ScoringError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixprompt
