#pragma once

#include <stdexcept>
#include <string>

namespace surveyor {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed instrument, baseline, config, or data file.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller broke an ordering or pairing rule (e.g. memory history mismatch).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Precondition on numeric input violated (out-of-range scale value, bad df).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Anything that went wrong talking to a completion provider.
class BackendError : public Error {
 public:
  using Error::Error;
  // Whether another attempt might succeed.
  virtual bool retryable() const noexcept { return false; }
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
  bool retryable() const noexcept override { return true; }
};

class HttpStatusError : public BackendError {
 public:
  HttpStatusError(int status, const std::string& body)
      : BackendError("HTTP " + std::to_string(status) + ": " + body), status_(status) {}
  int status() const noexcept { return status_; }
  bool retryable() const noexcept override { return status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

// Local guard: the prompt would not fit the model context. Never sent.
class ContextLimitError : public BackendError {
 public:
  using BackendError::BackendError;
};

class ReplayMissError : public BackendError {
 public:
  using BackendError::BackendError;
};

class SingularDesignError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace surveyor
