#pragma once

#include <stdexcept>
#include <string>

namespace bipar {

enum class ErrorKind {
    parse,
    index_out_of_range,
    topology_mismatch,
    dimension_mismatch,
    degenerate_input,
    invalid_argument,
    unknown_name,
    io,
    diverged,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::index_out_of_range: return "index_out_of_range";
    case ErrorKind::topology_mismatch: return "topology_mismatch";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::degenerate_input: return "degenerate_input";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::unknown_name: return "unknown_name";
    case ErrorKind::io: return "io";
    case ErrorKind::diverged: return "diverged";
    }
    return "unknown";
}

// Every failure raised by the library carries a machine-readable kind so the
// CLI and HTTP layers can report it without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Parse failures also remember the offending 1-based line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) throw Error(kind, what);
}

}  // namespace bipar
