// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_ERROR_HPP_
#define ETBELL_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace etbell
{

/// Input outside the mathematical domain of an operation (non-physical
/// state, visibility out of range, ...).
class DomainError : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Invalid simulation, tomography or run configuration.
class ConfigError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Event stream violates an ordering or structural precondition.
class ProcessingError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// An estimate that needs data which is absent or empty.
class IncompleteDataError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// An estimator evaluated on data that does not define it (zero counts).
class UndefinedEstimateError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class SingularFitError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A postselection rule accepted nothing at a required setting pair.
class DegeneratePostselectionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error
{
public:
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual)
    {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace etbell

#endif // ETBELL_ERROR_HPP_
