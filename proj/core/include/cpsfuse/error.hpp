#pragma once

#include <stdexcept>
#include <string>

namespace cpsfuse {

/// Base for all library errors: violated preconditions and invalid arguments.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is malformed or inconsistent (bad files, unknown labels,
/// missing records). The CLI maps these to exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpsfuse
