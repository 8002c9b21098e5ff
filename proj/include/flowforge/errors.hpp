#pragma once

#include <stdexcept>
#include <string>

namespace flowforge {

// Error taxonomy mirrored by the CLI exit codes:
//   ConfigError -> 1, DataError -> 2, anything else -> 3.

// Invalid configuration: bad flags, malformed plans, k out of range, ...
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with the data itself: schema mismatches, unreadable files,
// type errors, out-of-domain values.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flowforge
