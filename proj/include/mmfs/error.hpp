#pragma once

#include <stdexcept>
#include <string>

namespace mmfs {

/// Raised when an argument violates an operation's precondition
/// (out-of-range k, s, c, mismatched shapes, ...).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input files.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The normal equations of the W update cannot be solved.
class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw PreconditionError(msg);
}

} // namespace detail
} // namespace mmfs
