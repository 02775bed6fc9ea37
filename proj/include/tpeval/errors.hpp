#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tpeval {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Transport gave up after exhausting the retry policy. Carries the request
// digest so the failing exchange can be located in logs and cache.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::string request_digest)
      : Error(what + " [request " + request_digest + "]"),
        request_digest_(std::move(request_digest)) {}
  const std::string& request_digest() const { return request_digest_; }

 private:
  std::string request_digest_;
};

class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

class MalformedResponse : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class MissingSlot : public Error {
 public:
  using Error::Error;
};

class MalformedOptimizerOutput : public Error {
 public:
  using Error::Error;
};

class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

// Unusable runtime configuration (bad file, unknown backend kind, missing
// backend id). Distinct from ConfigMismatch, which is a resume-identity
// conflict.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string file, int line)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

// Aggregates every violation found in one pass so callers see them all at once.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& vs) {
    std::string out = "validation failed:";
    for (const auto& v : vs) out += "\n  - " + v;
    return out;
  }
  std::vector<std::string> violations_;
};

}  // namespace tpeval
