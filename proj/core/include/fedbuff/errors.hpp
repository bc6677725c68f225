#pragma once

#include <stdexcept>
#include <string>

namespace fedbuff {

// Invalid configuration or violated input invariant. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Mid-run failure: NaN iterate, staleness violation in enforce mode,
// event-queue deadlock. Maps to CLI exit code 2.
class RunAbort : public std::runtime_error {
 public:
  explicit RunAbort(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedbuff
