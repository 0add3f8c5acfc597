// errors.hpp: exception types shared by every qar module.
#pragma once

#include <stdexcept>
#include <string>

namespace qar {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

class InvalidLabel : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Missing or malformed configuration (e.g. bare Hamiltonian without couplings).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A value violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Time integration failed; carries the last time that was reached with a valid state.
class IntegrationError : public Error {
public:
    IntegrationError(const std::string& what, double last_good_time)
        : Error(what), last_good_time_(last_good_time) {}
    double last_good_time() const noexcept { return last_good_time_; }

private:
    double last_good_time_;
};

/// A propagated density matrix acquired an eigenvalue below -1e-8.
class PositivityViolation : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

class NonUniqueSteadyState : public Error {
public:
    using Error::Error;
};

/// A state passed as a steady state does not satisfy L(rho) = 0.
class StaleState : public Error {
public:
    using Error::Error;
};

/// A trace never crossed the reset threshold; carries the final population.
class NoReset : public Error {
public:
    NoReset(const std::string& what, double final_p1) : Error(what), final_p1_(final_p1) {}
    double final_p1() const noexcept { return final_p1_; }

private:
    double final_p1_;
};

class IllPosed : public Error {
public:
    using Error::Error;
};

class BudgetExceeded : public Error {
public:
    using Error::Error;
};

}  // namespace qar
