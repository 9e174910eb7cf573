#pragma once

#include <stdexcept>
#include <string>

namespace wls {

// Stable error codes; the CLI reports them in its error JSON.
enum class ErrorCode {
  kInput = 1,
  kConvergence = 2,
  kDivergence = 3,
  kRefusal = 4,
  kDefinedValue = 5,
  kIo = 6,
  kVerify = 7,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kInput: return "input_error";
    case ErrorCode::kConvergence: return "convergence_error";
    case ErrorCode::kDivergence: return "divergence_error";
    case ErrorCode::kRefusal: return "refusal_error";
    case ErrorCode::kDefinedValue: return "defined_value_error";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kVerify: return "verify_mismatch";
  }
  return "unknown_error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorCode::kInput, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

// A --verify re-run produced different artifacts.
struct VerifyError : Error {
  explicit VerifyError(const std::string& what) : Error(ErrorCode::kVerify, what) {}
};
struct RefusalError : Error {
  explicit RefusalError(const std::string& what) : Error(ErrorCode::kRefusal, what) {}
};

// A quantity is mathematically undefined for the given input (0/0 and the like).
struct DefinedValueError : Error {
  explicit DefinedValueError(const std::string& what)
      : Error(ErrorCode::kDefinedValue, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(ErrorCode::kConvergence, what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(ErrorCode::kDivergence, what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

}  // namespace wls
