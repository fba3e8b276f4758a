#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace scaleforge {

/// Thrown when a caller breaks a documented precondition.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file. `line` is 1-based; 0 when the locator is unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line)
        : std::runtime_error(message), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct Violation {
    std::string image_id;
    std::string rule;
};

/// Carries every invariant violation found, not only the first.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<Violation> violations);

    const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
    std::vector<Violation> violations_;
};

class BuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scaleforge
