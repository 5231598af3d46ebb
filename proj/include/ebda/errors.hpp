#pragma once

#include <stdexcept>
#include <string>

namespace ebda {

// Base of every error raised by the library. Callers that only care about
// "something in ebda failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents: wrong size, bad magic, unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Operands whose dimensions or channel counts do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// A sample value outside the range its bit depth allows.
class RangeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
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

// Weight files that parse but do not describe the network their config asks for.
class ModelIntegrityError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public Error {
 public:
  using Error::Error;
};

class ProcessError : public Error {
 public:
  using Error::Error;
};

class NonMonotoneCurveError : public Error {
 public:
  using Error::Error;
};

class NonOverlappingCurvesError : public Error {
 public:
  using Error::Error;
};

class UnusableSourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ebda
