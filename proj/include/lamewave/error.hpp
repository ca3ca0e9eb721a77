#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lamewave {

// Error hierarchy. The CLI maps InputError/GeometryError/ResourceError to
// exit code 2 (validation) and SolverError/PartialResultError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class InputError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "input"; }
};

class GeometryError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "geometry"; }
};

class ResourceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "resource"; }
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, double shift = 0.0)
      : Error(what), shift_(shift) {}
  const char* kind() const noexcept override { return "solver"; }
  double shift() const noexcept { return shift_; }

 private:
  double shift_;
};

class PartialResultError : public SolverError {
 public:
  PartialResultError(const std::string& what, std::size_t converged)
      : SolverError(what), converged_(converged) {}
  const char* kind() const noexcept override { return "partial_result"; }
  std::size_t converged() const noexcept { return converged_; }

 private:
  std::size_t converged_;
};

}  // namespace lamewave
