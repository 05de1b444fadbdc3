#pragma once

#include <stdexcept>
#include <string>

namespace stratwave {

// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or malformed input data (violated preconditions).
class InvalidInput : public Error {
public:
  using Error::Error;
};

// A standing structural assumption on the profile or flow does not hold.
class AssumptionViolation : public Error {
public:
  using Error::Error;
};

// An iterative solver or root finder did not reach its tolerance.
class ConvergenceFailure : public Error {
public:
  using Error::Error;
};

// A computed state left its admissible set: psi outside the audit window,
// or a surface profile with |eta| >= 1.
class DomainExit : public Error {
public:
  using Error::Error;
};

// Should be impossible under the checked assumptions (e.g. a singular
// linear system that the maximum principle rules out).
class InternalError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace stratwave
