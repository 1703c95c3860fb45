#ifndef TRIHEDGE_ERRORS_HPP
#define TRIHEDGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace trihedge {

// Invalid arguments, domain violations, policies out of range.
class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Problem size exceeds an explicit cap (e.g. full-tree enumeration).
class SizeError : public InputError {
public:
    explicit SizeError(const std::string& msg) : InputError(msg) {}
};

// Requested evaluation point lies outside a computed grid.
class CoverageError : public InputError {
public:
    explicit CoverageError(const std::string& msg) : InputError(msg) {}
};

// Bad run configuration (unknown keys, CFL violation, missing blocks).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/overflow during a computation, or a solver that failed to converge.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace trihedge

#endif // TRIHEDGE_ERRORS_HPP
