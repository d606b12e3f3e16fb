#pragma once

#include <stdexcept>
#include <string>

namespace zcl {

// Base for every error the library throws. The CLI maps InputError subclasses
// to exit code 2 and anything else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class IoError : public InputError {
public:
    using InputError::InputError;
};

class FormatError : public InputError {
public:
    using InputError::InputError;
};

// Arguments outside an operation's domain (alpha == 1, i out of range, ...).
class DomainError : public InputError {
public:
    using InputError::InputError;
};

class EmptyProfileError : public InputError {
public:
    using InputError::InputError;
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, double achieved_tolerance)
        : Error(what), achieved_tolerance_(achieved_tolerance) {}

    double achieved_tolerance() const noexcept { return achieved_tolerance_; }

private:
    double achieved_tolerance_;
};

}  // namespace zcl
