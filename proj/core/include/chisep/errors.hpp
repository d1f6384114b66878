#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace chisep {

// Precondition violations (bad dims, shape mismatch, out-of-range arguments).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed .svol / checkpoint bytes. `offset` is the byte position where
// parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::string path)
      : std::runtime_error(what + ": " + path), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Lesion could not be placed inside the mask after the retry budget.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric undefined for the inputs (e.g. zero-energy reference).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite loss, diverging solver and similar numeric breakdowns.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solver failed to decrease its objective. Carries the objective
// trace up to the failure.
class SolverError : public NumericError {
 public:
  SolverError(const std::string& what, std::vector<double> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace chisep
