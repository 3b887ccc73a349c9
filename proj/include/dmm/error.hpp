#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented precondition or type invariant.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Configuration could not be parsed or validated. Collects every problem
/// found rather than stopping at the first one.
class ConfigError : public Error {
public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out += "; ";
      out += s;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

/// The inner nonlinear iteration of an implicit step did not converge.
class ConvergenceError : public Error {
public:
  ConvergenceError(std::size_t time_index, int iterations, double residual)
      : Error("implicit step did not converge at time index " +
              std::to_string(time_index) + " after " +
              std::to_string(iterations) + " iterations (residual " +
              std::to_string(residual) + ")"),
        time_index_(time_index),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t time_index() const noexcept { return time_index_; }
  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

private:
  std::size_t time_index_;
  int iterations_;
  double residual_;
};

/// A Monte Carlo path failed (policy does not cover a visited state).
class SimulationError : public Error {
public:
  SimulationError(std::size_t path_index, const std::string& what)
      : Error("path " + std::to_string(path_index) + ": " + what),
        path_index_(path_index) {}

  std::size_t path_index() const noexcept { return path_index_; }

private:
  std::size_t path_index_;
};

}  // namespace dmm
