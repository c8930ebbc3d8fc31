#pragma once

#include <stdexcept>
#include <string>

namespace dvar {

/// Invalid configuration, flags, or file contents. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed trace/record data; carries the offending line number (1-based).
struct TraceParseError : ConfigError {
    TraceParseError(const std::string& what, std::size_t line)
        : ConfigError(what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

/// Rejected runtime input (non-finite loss, shape mismatch). CLI maps this to exit code 1.
struct InputError : std::runtime_error {
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dvar
