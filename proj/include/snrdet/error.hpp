#pragma once

#include <stdexcept>
#include <string>

namespace snrdet {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (bad argument, wrong shape).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data could not be read or is inconsistent (files, manifests, corpora).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (non-identifiable fit, NaN loss, failed refits).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace snrdet
