#pragma once

#include <stdexcept>
#include <string>

namespace prism {

// Root of every error thrown by the library. The CLI maps subclasses onto
// exit codes (see cli/commands.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport failure after all retries were spent.
class BackendUnavailable : public Error {
 public:
  using Error::Error;
};

// The backend answered, but not in the shape we expected.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ScriptExhausted : public Error {
 public:
  using Error::Error;
};

// Input text violates a required format (e.g. a question without the
// "Do you see" prefix).
class FormatError : public Error {
 public:
  using Error::Error;
};

class QuestionParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// Loss or ratio became NaN/inf during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace prism
