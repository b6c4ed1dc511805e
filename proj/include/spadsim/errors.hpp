#pragma once

#include <stdexcept>
#include <string>

namespace spadsim {

/// Bad configuration file, key, value, or parameter combination.
/// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad command-line usage (missing/invalid flags). Exit code 2.
class UsageError : public std::runtime_error {
  public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A statistical estimate could not be formed from the data given
/// (e.g. non-positive photon count estimate). Exit code 3.
class StatisticsError : public std::runtime_error {
  public:
    explicit StatisticsError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A curve fit failed to produce a usable result. Exit code 3.
class FitError : public std::runtime_error {
  public:
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spadsim
