#pragma once

#include <stdexcept>
#include <string>

namespace mpal {

/// Raised on malformed inputs, violated preconditions, or bad files.
/// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Raised when an iterative solver exhausts its budget without a certificate.
/// The CLI maps this to exit code 3.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

}  // namespace mpal
