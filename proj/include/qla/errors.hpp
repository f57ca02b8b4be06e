// Error taxonomy for the load-assignment suite.
//
// Every throwing path in the libraries uses one of these types so that the
// command-line front end can map failures onto its exit-code contract:
//   2  usage / input validation
//   3  infeasible problem
//   4  iteration budget exhausted without convergence
//   5  violated internal invariant (should never happen on valid inputs)
#pragma once

#include <stdexcept>
#include <string>

namespace qla {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
    virtual int exit_code() const noexcept { return 2; }
};

/// Bad arguments, malformed files, or values outside a function's domain.
class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// The model admits no feasible point (e.g. demand exceeds usable capacity).
class InfeasibleError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// An iterative method hit its iteration cap before reaching its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// A result violated a property the implementation promises to maintain.
class InvariantError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 5; }
};

}  // namespace qla
