#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace phil {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters, malformed config files or inconsistent windows.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Errors raised while a simulation is stepping carry the failing step.
class RuntimeError : public Error {
public:
    RuntimeError(const std::string& what, std::uint64_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), m_step(step) {}

    std::uint64_t step() const noexcept { return m_step; }

private:
    std::uint64_t m_step;
};

class DivergenceError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class ItmInstabilityError : public RuntimeError {
public:
    using RuntimeError::RuntimeError;
};

class TransportError : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    using Error::Error;
};

class EventError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace phil
