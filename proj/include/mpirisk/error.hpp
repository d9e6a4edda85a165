#pragma once

#include <stdexcept>
#include <string>

namespace mpirisk {

enum class ErrorCode {
    schema,        // malformed header / document structure
    row,           // unparseable cell, carries a line number
    duplicate,     // duplicate date
    precondition,  // caller violated an operation precondition
    transport,     // network failure, retryable
    data,          // remote payload unusable
    degenerate,    // e.g. a risk condition never observed
    dimension,     // feature count mismatch
    validation,    // series failed validation at a module boundary
    io,            // file system
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    bool retryable() const noexcept { return code_ == ErrorCode::transport; }

private:
    ErrorCode code_;
};

class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t line, const std::string& message)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace mpirisk
