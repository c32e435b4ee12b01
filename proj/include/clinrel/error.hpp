#pragma once

#include <stdexcept>
#include <string>

namespace clinrel {

// Domain failures: bad inputs, missing registry roles, violated invariants.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and configuration failures (unreadable files, bad JSON, ...).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace clinrel
