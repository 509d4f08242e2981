#pragma once

#include <stdexcept>
#include <string>

namespace voxssl {

/// Bad or inconsistent run configuration (unknown key, invalid value, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure at runtime: non-finite loss, zero-norm vector, ...
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// On-disk artifact does not match expectations (checkpoint/config mismatch,
/// corrupt or truncated file, wrong magic).
class ArtifactError : public std::runtime_error {
 public:
  explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace voxssl
