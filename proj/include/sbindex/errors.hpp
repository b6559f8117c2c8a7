#pragma once

#include <stdexcept>
#include <string>

namespace sbindex {

/// Error categories map 1:1 onto the CLI exit codes.
enum class ErrorCategory {
    usage = 1,    // bad arguments / configuration
    data = 2,     // unreadable input, schema violations, insufficient data
    numeric = 3,  // divergent tails, singular fits, quadrature failures
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }
    int exit_code() const { return static_cast<int>(category_); }

private:
    ErrorCategory category_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorCategory::usage, message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorCategory::data, message) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error(ErrorCategory::numeric, message) {}
};

}  // namespace sbindex
