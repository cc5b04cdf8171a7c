// SPDX-License-Identifier: Apache-2.0
// ------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace atr
{

// Invalid configuration object (profile, monitor config, experiment spec).
class config_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Invalid function argument (length mismatch, empty grid, bad window, ...).
class argument_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Input is well-formed but carries no information (all-zero PDP, empty mask).
class degenerate_input_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

// Operation not allowed in the current monitor phase.
class state_error : public std::logic_error
{
public:
    using std::logic_error::logic_error;
};

// Malformed trace or spec file. Carries the 1-based line number, 0 if unknown.
class parse_error : public std::runtime_error
{
public:
    parse_error(const std::string &msg, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Record or file written with an unsupported schema version.
class version_error : public parse_error
{
public:
    using parse_error::parse_error;
};

// File system failure; message includes the path.
class io_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace atr
