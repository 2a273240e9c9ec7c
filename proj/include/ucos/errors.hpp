#pragma once

#include <stdexcept>
#include <string>

namespace ucos {

// Internal failure: solver divergence, corrupt state, broken invariant.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user input: missing files, shape mismatches, invalid options.
// The CLI maps this to exit code 2, everything else to 1.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

}  // namespace ucos
