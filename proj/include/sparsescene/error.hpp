#pragma once

#include <stdexcept>
#include <string>

namespace sparsescene {

// Coarse error category; maps one-to-one onto CLI exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, int iteration = -1)
      : Error(ErrorKind::Numerical, what), iteration_(iteration) {}
  // Solver iteration at which the failure surfaced, -1 when not applicable.
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

// Bank file problems are distinguished so callers can report them precisely.
enum class BankErrorCode { Corrupt, DimensionMismatch, VersionMismatch };

class BankFormatError : public DataError {
 public:
  BankFormatError(BankErrorCode code, const std::string& what)
      : DataError(what), code_(code) {}
  BankErrorCode code() const noexcept { return code_; }

 private:
  BankErrorCode code_;
};

}  // namespace sparsescene
