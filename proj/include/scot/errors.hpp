#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scot {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// ---- backend errors -------------------------------------------------------

/// Network or protocol failure. Retriable.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The backend answered with a non-retriable refusal (4xx, malformed reply).
class BackendRefused : public Error {
 public:
  BackendRefused(const std::string& what, int status = 0)
      : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class Timeout : public Error {
 public:
  using Error::Error;
};

/// The backend cannot report next-token alternatives.
class LogprobsUnsupported : public Error {
 public:
  using Error::Error;
};

// ---- protocol errors ------------------------------------------------------

class EmptyDraftSet : public Error {
 public:
  EmptyDraftSet() : Error("selection requires at least one draft") {}
};

class AllDraftsFailed : public Error {
 public:
  using Error::Error;
};

class SelectionFailed : public Error {
 public:
  explicit SelectionFailed(const std::string& what, double latency_ms = 0.0)
      : Error(what), latency_ms_(latency_ms) {}
  /// Time already spent on the failed attempts.
  double latency_ms() const noexcept { return latency_ms_; }

 private:
  double latency_ms_;
};

// ---- metrics errors -------------------------------------------------------

class NonPositiveLatency : public Error {
 public:
  using Error::Error;
};

class NonPositiveTime : public Error {
 public:
  using Error::Error;
};

class EmptyTraceSet : public Error {
 public:
  EmptyTraceSet() : Error("trace set is empty") {}
};

class ModeMismatch : public Error {
 public:
  using Error::Error;
};

class MixedDatasets : public Error {
 public:
  using Error::Error;
};

// ---- data / io errors -----------------------------------------------------

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateId : public Error {
 public:
  DuplicateId(const std::string& id, std::size_t line)
      : Error("duplicate question id '" + id + "' at line " +
              std::to_string(line)),
        id_(id),
        line_(line) {}
  const std::string& id() const noexcept { return id_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string id_;
  std::size_t line_;
};

/// A builder was handed a question id listed in the evaluation manifest.
class ManifestOverlap : public Error {
 public:
  using Error::Error;
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace scot
