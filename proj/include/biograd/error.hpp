#pragma once

#include <stdexcept>
#include <string>

namespace biograd {

// Shape disagreement between tensors, layers or caches.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied settings: unknown activation, sparsity out of range, ...
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure: NaN/Inf values, singular systems, diverged training.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File ingestion or serialization problems.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Config-file syntax errors carry the offending position (1-based).
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line_, int column_)
        : std::runtime_error(msg), line(line_), column(column_) {}
    int line;
    int column;
};

} // namespace biograd
