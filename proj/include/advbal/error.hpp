#pragma once

#include <stdexcept>
#include <string>

namespace advbal {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments: shape mismatches, non-finite values, out-of-range parameters.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// A balancing problem too small to be meaningful (fewer than two rows on a side).
class DegenerateProblem : public Error {
public:
    using Error::Error;
};

// A classifier asked to learn from a single class.
class DegenerateLabels : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

// Numerical failure inside an algorithm (e.g. a non-finite loss).
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace advbal
