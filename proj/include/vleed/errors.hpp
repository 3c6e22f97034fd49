#pragma once

#include <stdexcept>
#include <string>

namespace vleed {

// Caller broke a documented precondition (shapes, ranges, labels).
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// A computation produced NaN/Inf or a degenerate value (zero norm etc).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (single-class dataset, impossible split, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// On-disk container is malformed (bad magic, truncation, version).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem-level failure (cannot open/read/write).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// A tape was reused after the parameters it recorded were mutated.
class StaleTapeError : public std::logic_error {
public:
    explicit StaleTapeError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace vleed
