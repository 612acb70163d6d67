#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace difflim {

// Unknown scenario id or malformed scenario parameters.
class NotFoundError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// exp(-2 * int a) would overflow on the requested table domain.
class DomainTooWideError : public std::runtime_error {
 public:
  DomainTooWideError(const std::string& msg, double x) : std::runtime_error(msg), x_(x) {}
  double x() const noexcept { return x_; }

 private:
  double x_;
};

// Argument outside the tabulated range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Path left the simulation domain [-X, X].
class ExcursionError : public std::runtime_error {
 public:
  ExcursionError(const std::string& msg, std::size_t step) : std::runtime_error(msg), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Non-finite value produced during integration.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& msg, std::size_t step) : std::runtime_error(msg), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

// Scale derivative outside the K1 band [delta, C].
class ClassError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Too many failed paths in an ensemble.
class EnsembleError : public std::runtime_error {
 public:
  EnsembleError(const std::string& msg, std::size_t failed, std::size_t total)
      : std::runtime_error(msg), failed_(failed), total_(total) {}
  std::size_t failed() const noexcept { return failed_; }
  std::size_t total() const noexcept { return total_; }

 private:
  std::size_t failed_;
  std::size_t total_;
};

// Invalid experiment configuration; message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace difflim
