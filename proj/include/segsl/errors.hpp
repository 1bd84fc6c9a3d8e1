#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace segsl {

// Base of every error raised by the library. The CLI maps subclasses onto
// exit codes, so new failure modes should derive from one of the groups below.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input files that do not follow the documented TSV layouts.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), source_(source), line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

// Well-formed input that violates a data-model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Graphs on which entropy is undefined (no edges, isolated vertices) or
// operations that would produce such a graph.
class DegenerateGraphError : public Error {
public:
    using Error::Error;
};

// Operator called outside its contract (non-sibling combine, lifting a root child...).
class PreconditionError : public Error {
public:
    using Error::Error;
};

// Out-of-range configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// External embedding provider failed (exit status, timeout, malformed output).
class ProviderError : public Error {
public:
    using Error::Error;
};

namespace detail {
inline bool& warnings_enabled() {
    static bool enabled = true;
    return enabled;
}
}  // namespace detail

inline void set_warnings_enabled(bool on) { detail::warnings_enabled() = on; }

inline void log_warning(const std::string& msg) {
    if (detail::warnings_enabled())
        std::cerr << "[segsl] warning: " << msg << '\n';
}

}  // namespace segsl
