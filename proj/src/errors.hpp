#pragma once

#include <stdexcept>
#include <string>

namespace geopinn {

// Exit codes reported by the CLI. Library code throws the exceptions below;
// tools/geopinn_main.cpp maps them to these codes.
enum ExitCode : int {
    kExitOk = 0,
    kExitMissingFile = 2,
    kExitSyntaxError = 3,
    kExitUnknownKey = 4,
    kExitRangeError = 5,
    kExitDivergence = 6,
    kExitIoError = 7,
};

class ConfigError : public std::runtime_error {
public:
    enum class Kind { MissingFile, Syntax, UnknownKey, Range, Other };

    ConfigError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const { return kind_; }

    int exit_code() const {
        switch (kind_) {
        case Kind::MissingFile: return kExitMissingFile;
        case Kind::Syntax: return kExitSyntaxError;
        case Kind::UnknownKey: return kExitUnknownKey;
        case Kind::Range: return kExitRangeError;
        default: return kExitSyntaxError;
        }
    }

private:
    Kind kind_;
};

// A scalar operation was evaluated outside its domain (log of a negative
// value, division by zero, ...). Carries the offending op and value.
class NumericDomainError : public std::runtime_error {
public:
    NumericDomainError(const std::string& op, double value)
        : std::runtime_error("numeric domain error in '" + op +
                             "' at value " + std::to_string(value)),
          op_(op), value_(value) {}

    const std::string& op() const { return op_; }
    double value() const { return value_; }

private:
    std::string op_;
    double value_;
};

class DegenerateMetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateImmersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace geopinn
