#pragma once

#include <stdexcept>
#include <string>

namespace declist {

enum class ErrorKind {
  Validation,   // bad input data, schema, or arguments
  FitFailure,   // model fitting did not converge or is ill-posed
  Io,           // file system / parse failures
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

  // Process exit code used by the CLI for this class of failure.
  int exit_code() const {
    switch (kind_) {
      case ErrorKind::Validation: return 2;
      case ErrorKind::FitFailure: return 3;
      case ErrorKind::Io: return 4;
    }
    return 1;
  }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_validation(const std::string& msg) {
  throw Error(ErrorKind::Validation, msg);
}
[[noreturn]] inline void throw_fit(const std::string& msg) {
  throw Error(ErrorKind::FitFailure, msg);
}
[[noreturn]] inline void throw_io(const std::string& msg) {
  throw Error(ErrorKind::Io, msg);
}

}  // namespace declist
