#pragma once

#include <stdexcept>
#include <string>

namespace cpml {

/// Malformed or inconsistent input data (bad CSV, too few classes, unsplittable sizes).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values or a failed eigendecomposition during optimization.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid arguments (bad p, empty grid, shape mismatches) raise std::invalid_argument.

}  // namespace cpml
