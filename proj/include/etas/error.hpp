#pragma once

#include <stdexcept>
#include <string>

namespace etas {

enum class ErrorKind {
    invalid_argument,
    parse,
    empty_period,
    degenerate_likelihood,
    not_positive_definite,
    laplace_failure,
    mismatched_models,
    io,
};

[[nodiscard]] inline const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::parse: return "parse";
        case ErrorKind::empty_period: return "empty_period";
        case ErrorKind::degenerate_likelihood: return "degenerate_likelihood";
        case ErrorKind::not_positive_definite: return "not_positive_definite";
        case ErrorKind::laplace_failure: return "laplace_failure";
        case ErrorKind::mismatched_models: return "mismatched_models";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

// All library failures are reported through this type; `kind()` lets callers
// (the CLI in particular) map failures onto exit codes without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorKind::invalid_argument, message);
}

}  // namespace etas
