#pragma once

#include <stdexcept>
#include <string>

namespace viscofrac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Geometric construction failed (lip-mesh, degenerate input).
class ConstructionError : public Error {
public:
    using Error::Error;
};

/// A linear or convex solve failed or did not converge.
class SolverError : public Error {
public:
    using Error::Error;
};

/// A time step could not be completed.
class StepError : public Error {
public:
    using Error::Error;
};

}  // namespace viscofrac
