#pragma once

#include <stdexcept>
#include <string>

namespace pgs {

// Base of everything the codec throws. The CLI maps the subclasses onto
// process exit codes (InvariantError -> 2, FormatError -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition, type invariant or octree property does not hold.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or unreadable input (files and bitstreams).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pgs
