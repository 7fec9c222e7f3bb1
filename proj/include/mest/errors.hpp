#pragma once

#include <stdexcept>
#include <string>

namespace mest {

/// Invalid specification or solver/experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable or malformed input data.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Gradient iteration produced a non-finite objective or runaway iterate.
class SolverDivergence : public std::runtime_error {
 public:
  explicit SolverDivergence(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mest
