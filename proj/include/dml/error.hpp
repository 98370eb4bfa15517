#pragma once

#include <stdexcept>
#include <string>

namespace dml {

/// Incompatible operand shapes for a primitive or layer.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A primitive produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment or model configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A metric is undefined for the given input (e.g. single-class AUC).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace dml
