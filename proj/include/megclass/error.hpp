#pragma once

#include <stdexcept>
#include <string>

namespace megclass {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: corpus records, class files, label files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A stage ran before the artifacts it depends on exist (or they are stale).
class PrerequisiteError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf values, zero-norm vectors, rank deficiency.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Cache or checkpoint files that are truncated, stale or from another run.
class CacheError : public Error {
 public:
  using Error::Error;
};

// Failure inside an embedding provider. Retrying the same sentence may succeed.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& doc_id, int sent_index, const std::string& what)
      : Error("provider failed on " + doc_id + "#" + std::to_string(sent_index) + ": " + what),
        doc_id_(doc_id),
        sent_index_(sent_index) {}

  const std::string& doc_id() const { return doc_id_; }
  int sent_index() const { return sent_index_; }
  bool retryable() const { return true; }

 private:
  std::string doc_id_;
  int sent_index_;
};

}  // namespace megclass
