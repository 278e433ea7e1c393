#pragma once

#include <stdexcept>
#include <string>

namespace bidro {

// Bad input: malformed instance, dimension mismatch, out-of-range parameter.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical routine could not produce a certified answer.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, std::string dump = {})
      : std::runtime_error(what), dump_(std::move(dump)) {}

  // Text dump of the failing subproblem, empty when not available.
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

}  // namespace bidro
