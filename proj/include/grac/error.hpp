#pragma once

#include <stdexcept>
#include <string>

namespace grac {

// Invalid problem setup: bad parameters, domain too small, unsupported range.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Geometric construction failed (inverted triangle, degenerate clip, ...).
class GeometryError : public std::runtime_error {
public:
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: singular configuration, infeasible system, no convergence.
class NumericsError : public std::runtime_error {
public:
  explicit NumericsError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace grac
