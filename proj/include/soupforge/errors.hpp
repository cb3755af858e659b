#pragma once

#include <stdexcept>
#include <string>

namespace soupforge {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint-file problems. Every failure reason gets its own kind so
// callers (and tests) can tell a corrupted file from a truncated one.
struct IoError : Error {
  enum class Kind {
    OpenFailed,
    WriteFailed,
    BadMagic,
    BadVersion,
    CrcMismatch,
    Truncated,
    Malformed,
  };
  Kind kind;
  IoError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

// Mismatched vector lengths or layer maps; signals a caller bug.
struct ShapeError : Error {
  using Error::Error;
};

struct NotFoundError : Error {
  using Error::Error;
};

// Residency ceiling would be exceeded.
struct BudgetError : Error {
  using Error::Error;
};

// Training produced non-finite values.
struct DivergedError : Error {
  using Error::Error;
};

// Bad usage or configuration; the CLI maps this to exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace soupforge
