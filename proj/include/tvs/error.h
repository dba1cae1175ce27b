#pragma once

#include <stdexcept>
#include <string>

namespace tvs {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bytes or text in one of the on-disk formats.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that references something that does not exist.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

}  // namespace tvs
