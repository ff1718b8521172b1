#pragma once

#include <stdexcept>
#include <string>

namespace drm {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError   -> 1  (bad flags, violated preconditions)
//   DataError    -> 2  (unreadable/degenerate input data)
//   NumericError -> 3  (convergence, rank, overflow failures)
class Error : public std::runtime_error {
 public:
  Error(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace drm
