#pragma once

#include <stdexcept>
#include <string>

namespace fedfair {

/// Invalid experiment, dataset or model configuration. Raised before any training starts.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Violated exchange contract between simulated clients and server (shape mismatch, duplicate round).
class ProtocolError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A metric that has no value for the given inputs (e.g. JFI of an all-zero vector).
class UndefinedMetric : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace fedfair
