#pragma once

#include <stdexcept>
#include <string>

namespace rrl {

/// Thrown when an exact computation would exceed its enumeration budget.
/// Carries the offending size so callers can report it.
class capacity_error : public std::runtime_error {
public:
    capacity_error(const std::string& what, double requested, double budget)
        : std::runtime_error(what), requested_(requested), budget_(budget) {}

    double requested() const noexcept { return requested_; }
    double budget() const noexcept { return budget_; }

private:
    double requested_;
    double budget_;
};

/// Thrown when a configuration file or command line is malformed or
/// internally inconsistent. The command line maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace rrl
