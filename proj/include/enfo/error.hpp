#pragma once

#include <stdexcept>
#include <string>

namespace enfo {

/// Raised for malformed or inconsistent inputs (shape mismatches, bad CSV,
/// invalid configuration). Maps to CLI exit code 1.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an optimization or solver produces non-finite values.
/// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}

}  // namespace enfo
