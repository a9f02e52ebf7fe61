#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace market_ising {

// Root of everything this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateLattice : public Error {
public:
    using Error::Error;
};

class InvalidSite : public Error {
public:
    using Error::Error;
};

class SizeMismatch : public Error {
public:
    using Error::Error;
};

class InvalidTemperature : public Error {
public:
    using Error::Error;
};

class TooLargeToEnumerate : public Error {
public:
    using Error::Error;
};

class InvalidSize : public Error {
public:
    using Error::Error;
};

// Thrown by the Gaussian fit when the histogram has too little spread.
// Carries the sample standard deviation so callers can still report a width.
class DegenerateHistogram : public Error {
public:
    DegenerateHistogram(const std::string& what, double fallback_width)
        : Error(what), fallback_width_(fallback_width) {}

    double fallback_width() const noexcept { return fallback_width_; }

private:
    double fallback_width_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

} // namespace market_ising
