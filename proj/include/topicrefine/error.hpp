#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace topicrefine {

// Error categories. The CLI maps them onto exit codes and prints the
// category as a machine-parseable `error_code:` line.
enum class ErrorCode {
  usage,    // bad invocation
  config,   // bad configuration (missing credentials, K > |V|, ...)
  format,   // malformed file or response (ragged topic line, broken JSON, ...)
  io,       // filesystem failure
  data,     // semantically invalid data (degenerate corpus, zero vector, ...)
  backend,  // LLM backend failure
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::usage: return "usage";
    case ErrorCode::config: return "config";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
    case ErrorCode::data: return "data";
    case ErrorCode::backend: return "backend";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

  static Error usage(const std::string& m) { return {ErrorCode::usage, m}; }
  static Error config(const std::string& m) { return {ErrorCode::config, m}; }
  static Error format(const std::string& m) { return {ErrorCode::format, m}; }
  static Error io(const std::string& m) { return {ErrorCode::io, m}; }
  static Error data(const std::string& m) { return {ErrorCode::data, m}; }
  static Error backend(const std::string& m) { return {ErrorCode::backend, m}; }

 private:
  ErrorCode code_;
};

// Retryable backend failure (transport error, 5xx, 429). The client's retry
// loop catches exactly this type; every other Error propagates immediately.
class TransientBackendError : public Error {
 public:
  explicit TransientBackendError(const std::string& m)
      : Error(ErrorCode::backend, m) {}
};

}  // namespace topicrefine
