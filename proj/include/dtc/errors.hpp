#pragma once

#include <stdexcept>
#include <string>

namespace dtc {

/// Axis extents disagree between operands.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed argument (repeated axis, bad enum value, precondition violated).
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical kernel produced an unusable result (NaN, negative trace, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested computation exceeds the configured memory or time budget.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration. `field()` names the offending key when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg, std::string field = {})
        : std::runtime_error(msg), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dtc
