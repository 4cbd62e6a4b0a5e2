#pragma once

#include <stdexcept>
#include <string>

namespace amdiff {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class SizeError : public Error {
public:
  using Error::Error;
};

// A non-finite value appeared during a numeric computation.
class NumericError : public Error {
public:
  using Error::Error;
};

// Raised when a computation has no meaningful result on the given input
// (empty selection, undefined entropy, empty corpus).
class DomainError : public Error {
public:
  using Error::Error;
};

}  // namespace amdiff
