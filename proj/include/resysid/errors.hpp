#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace resysid {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The Gram matrix of a Toeplitz slice is rank deficient or too badly
/// conditioned for the bounds to mean anything.
class SingularSystem : public Error {
 public:
  SingularSystem(int first_col, int last_col, double rcond)
      : Error("singular Toeplitz slice (" + std::to_string(first_col) + ", " +
              std::to_string(last_col) + "), reciprocal condition " +
              std::to_string(rcond)),
        first_col_(first_col),
        last_col_(last_col),
        rcond_(rcond) {}

  int first_col() const noexcept { return first_col_; }
  int last_col() const noexcept { return last_col_; }
  double rcond() const noexcept { return rcond_; }

 private:
  int first_col_;
  int last_col_;
  double rcond_;
};

/// Every candidate noise variance was rejected by the bound feasibility
/// checks. `reasons()` carries one line per rejected variance.
class NoFeasibleModel : public Error {
 public:
  explicit NoFeasibleModel(std::vector<std::string> reasons)
      : Error(summarize(reasons)), reasons_(std::move(reasons)) {}

  const std::vector<std::string>& reasons() const noexcept { return reasons_; }

 private:
  static std::string summarize(const std::vector<std::string>& reasons) {
    std::string msg = "no feasible model: all " +
                      std::to_string(reasons.size()) +
                      " noise variance candidates rejected";
    if (!reasons.empty()) msg += " (first: " + reasons.front() + ")";
    return msg;
  }

  std::vector<std::string> reasons_;
};

/// Not enough samples to start (or continue) an estimate.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or a file was malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace resysid
