#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace eapo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain argument.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between vectors/matrices/panels.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Not enough observations to evaluate an estimator.
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// Unsupported or inconsistent configuration (norm, family, grid...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed (non-finite gradient, solver breakdown).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent input data. Carries the source location when known.
class DataError : public Error {
public:
    DataError(const std::string& what, std::string file = {}, std::size_t line = 0)
        : Error(format(what, file, line)), file_(std::move(file)), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    static std::string format(const std::string& what, const std::string& file, std::size_t line) {
        if (file.empty()) return what;
        if (line == 0) return file + ": " + what;
        return file + ":" + std::to_string(line) + ": " + what;
    }

    std::string file_;
    std::size_t line_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInput(msg);
}

inline void require_shape(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

} // namespace detail
} // namespace eapo
