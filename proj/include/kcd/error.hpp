#pragma once

#include <stdexcept>
#include <string>

namespace kcd {

/// Thrown when an operation's preconditions are violated (bad shapes,
/// non-finite input, out-of-range step indices, infeasible mask parameters).
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Thrown for file-format and I/O failures (bad magic, version or checksum
/// mismatch, truncated or unreadable files).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a numeric computation leaves the finite domain (e.g. a
/// diverging training loss).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace kcd
