#pragma once

#include <stdexcept>
#include <string>

namespace cipherloop {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition (range, parity, size).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Key generation could not produce a valid key pair.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// A controller, codec or loop configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A fixed-point value does not fit the integer ring it is mapped into.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unexpected wire traffic.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Socket or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cipherloop
