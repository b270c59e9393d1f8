#pragma once

#include <stdexcept>
#include <string>

namespace hypar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument, violated precondition or non-finite input.
class DomainError : public Error {
public:
    using Error::Error;
};

/// State norm crossed the overflow guard during time integration.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double blowup_time)
        : Error(what), blowup_time_(blowup_time) {}
    [[nodiscard]] double blowup_time() const noexcept { return blowup_time_; }

private:
    double blowup_time_;
};

/// Newton (or other iterative) solve did not reach its tolerance.
class NoConvergenceError : public Error {
public:
    NoConvergenceError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}
    [[nodiscard]] double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

/// Jacobian became numerically singular: the solve sits on or near a bifurcation.
class BifurcationProximityError : public Error {
public:
    BifurcationProximityError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Fewer spectral lines than a comb needs.
class InsufficientCombError : public Error {
public:
    using Error::Error;
};

/// Frequency grid too coarse for the requested analysis.
class ResolutionError : public Error {
public:
    using Error::Error;
};

/// Configuration parse or validation failure. `path` is the dotted key path
/// of the offending entry (empty for syntax errors); line/column are 1-based
/// and zero when unknown.
class ConfigError : public Error {
public:
    ConfigError(const std::string& what, std::string path, int line = 0, int column = 0)
        : Error(what), path_(std::move(path)), line_(line), column_(column) {}
    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }

private:
    std::string path_;
    int line_;
    int column_;
};

}  // namespace hypar
