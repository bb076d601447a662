#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace storagessm {

// Base class for every error raised by the library. The CLI maps each
// subclass to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, double final_residual, int iterations)
      : Error(what), final_residual_(final_residual), iterations_(iterations) {}
  double final_residual() const noexcept { return final_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double final_residual_;
  int iterations_;
};

class RootFindError : public Error {
 public:
  RootFindError(const std::string& what, std::size_t grid_index)
      : Error(what), grid_index_(grid_index) {}
  std::size_t grid_index() const noexcept { return grid_index_; }

 private:
  std::size_t grid_index_;
};

class FilterDegeneracyError : public Error {
 public:
  FilterDegeneracyError(const std::string& what, std::size_t period)
      : Error(what), period_(period) {}
  // 1-based observation index at which all weights vanished.
  std::size_t period() const noexcept { return period_; }

 private:
  std::size_t period_;
};

class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace storagessm
