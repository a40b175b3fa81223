#pragma once

#include <stdexcept>
#include <string>

namespace xflowdg {

// Shape mismatch between operands.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced where a finite one is required.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (e.g. a tape replayed twice without reset).
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid argument value.
struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content (bad magic, truncation, dimension mismatch).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure (open/read/write).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A metric has no defined value for the given inputs.
struct MetricUndefinedError : std::runtime_error {
    explicit MetricUndefinedError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace xflowdg
