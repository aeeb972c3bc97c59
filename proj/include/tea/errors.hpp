#pragma once

#include <stdexcept>
#include <string>

namespace tea {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller passed a value outside an operation's domain.
struct InvalidInput : Error {
  using Error::Error;
};

// A file could not be read or does not follow its format.
struct ParseError : Error {
  using Error::Error;
};

// Well-formed data that violates a domain invariant.
struct ValidationError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace tea
