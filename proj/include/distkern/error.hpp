#pragma once

#include <stdexcept>
#include <string>

namespace distkern {

/// Invalid parameters, malformed configuration, unknown presets.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Problems with the input data itself: missing files, bad shapes, non-finite values,
/// sets too small for the requested neighbor index.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace distkern
