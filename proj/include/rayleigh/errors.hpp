#pragma once

#include <stdexcept>
#include <string>

namespace rayleigh {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

// Truncated mode basis too small for the requested scene.
class TruncationError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

// Derivative of g has weight outside the support of g.
class SupportViolation : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public Error {
public:
    using Error::Error;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

} // namespace rayleigh
