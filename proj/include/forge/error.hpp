#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or response. Carries "line N:" in the message when
// the source is line-oriented.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A structural invariant of loaded data does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration; messages name the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ProviderFault {
  transport,          // network-level failure, retryable
  rate_limit,         // provider asked us to slow down, retryable
  refusal,            // provider declined the request, not retryable
  invalid_reference,  // unknown dataset/job id
  quota,              // account-level limit
  unsupported,        // provider lacks the capability (e.g. logprobs)
  cassette_miss,      // replay mode and no recorded response
};

class ProviderError : public Error {
 public:
  ProviderError(ProviderFault fault, const std::string& msg)
      : Error(msg), fault_(fault) {}

  ProviderFault fault() const { return fault_; }
  bool retryable() const {
    return fault_ == ProviderFault::transport ||
           fault_ == ProviderFault::rate_limit;
  }

 private:
  ProviderFault fault_;
};

}  // namespace forge
