#pragma once

#include <stdexcept>
#include <string>

namespace ssdiag {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    validation = 2,
    degeneracy = 3,
    budget = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class DegeneracyError : public Error {
public:
    explicit DegeneracyError(const std::string& what) : Error(ErrorKind::degeneracy, what) {}
};

class BudgetError : public Error {
public:
    explicit BudgetError(const std::string& what) : Error(ErrorKind::budget, what) {}
};

}  // namespace ssdiag
