#pragma once

#include <stdexcept>
#include <string>

namespace tabbench {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input text (BIF, CSV, JSON). Carries line/column when known.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line, std::size_t col)
        : Error(msg + " (line " + std::to_string(line) + ", column " +
                std::to_string(col) + ")"),
          line(line), column(col) {}
    explicit ParseError(const std::string& msg) : Error(msg), line(0), column(0) {}
    std::size_t line;
    std::size_t column;
};

/// Structurally valid input that violates a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// Bad run configuration (CLI / config file).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace tabbench
