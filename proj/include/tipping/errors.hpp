#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tipping {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    DimensionError(std::size_t lhs, std::size_t rhs)
        : Error("dimension mismatch: " + std::to_string(lhs) + " vs " + std::to_string(rhs)),
          lhs_(lhs), rhs_(rhs) {}

    std::size_t lhs() const noexcept { return lhs_; }
    std::size_t rhs() const noexcept { return rhs_; }

private:
    std::size_t lhs_;
    std::size_t rhs_;
};

// Bad argument values: empty inputs, out-of-range parameters, unknown labels.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Boundary geometry where a closed-form quantity has a zero denominator.
class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

// Malformed or schema-violating input file.
class FormatError : public Error {
public:
    FormatError(const std::string& where, const std::string& what)
        : Error(where + ": " + what) {}
};

} // namespace tipping
