#pragma once

#include <stdexcept>
#include <string>

namespace veritas {

// Bad input files, malformed records, invalid configuration. CLI exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Requests naming entities that do not exist. CLI exit code 3.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Solver divergence and similar numerical breakdowns. CLI exit code 4.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DatasetError : public InputError {
public:
    enum class Kind { Parse, Reference, Type, Duplicate, Consistency };

    DatasetError(Kind kind, const std::string& what, int line = 0)
        : InputError(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          kind_(kind), line_(line) {}

    Kind kind() const noexcept { return kind_; }
    int line() const noexcept { return line_; }

private:
    Kind kind_;
    int line_;
};

} // namespace veritas
