// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pgaslab {

// Root of every error the library throws. Callers that only care about
// "the lab rejected this" can catch Error; tests match the concrete types.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad latency configuration, unknown component or missing cost symbol.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Out-of-bounds or misaligned global address.
class AddressError : public Error {
 public:
  using Error::Error;
};

// Persistent CAS exceeded its attempt cap.
class LivelockError : public Error {
 public:
  using Error::Error;
};

// Active-message handler registered after the communication epoch began.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

// Active-message arguments over the 64-byte limit, or malformed inputs.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A handler tried to reply twice or to issue network traffic.
class RestrictionViolation : public Error {
 public:
  using Error::Error;
};

// Operation invoked at a concurrency level it does not implement.
class ConcurrencyError : public Error {
 public:
  using Error::Error;
};

// Post-hoc data-structure check failed; benchmark output must be discarded.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgaslab
