#pragma once

#include <stdexcept>
#include <string>

namespace actgen {

// Malformed or inconsistent input data (corpus files, checkpoints, vocabularies).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a training loss or KL estimate leaves the finite/sane range.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace actgen
