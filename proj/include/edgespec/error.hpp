#pragma once

#include <stdexcept>
#include <string>

namespace edgespec {

// Bad arguments or violated preconditions. Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Numerical failure: iteration did not converge, truncation too small, etc.
// Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

class NonConvergence : public NumericalError {
public:
    explicit NonConvergence(const std::string& msg) : NumericalError(msg) {}
};

class IllPosed : public NumericalError {
public:
    explicit IllPosed(const std::string& msg) : NumericalError(msg) {}
};

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw InvalidInput(msg);
}

} // namespace edgespec
