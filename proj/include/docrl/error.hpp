#pragma once

#include <stdexcept>
#include <string>

namespace docrl {

/// Bad flags, thresholds outside their documented range, invalid patterns.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (JSONL lines, archives, tokenizers).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor archives that do not line up (names, shapes, dtypes).
class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace docrl
