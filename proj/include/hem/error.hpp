#pragma once

#include <stdexcept>
#include <string>

namespace hem {

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DataErrorKind {
    io,
    empty_table,
    missing_column,
    bad_value,
    duplicate_label,
    unknown_label,
    empty_receivers,
    self_receiver,
    timestamp_before_origin,
    too_few_nodes,
    out_of_range,
};

inline const char* to_string(DataErrorKind k) {
    switch (k) {
        case DataErrorKind::io: return "IoError";
        case DataErrorKind::empty_table: return "EmptyTable";
        case DataErrorKind::missing_column: return "MissingColumn";
        case DataErrorKind::bad_value: return "BadValue";
        case DataErrorKind::duplicate_label: return "DuplicateLabel";
        case DataErrorKind::unknown_label: return "UnknownLabel";
        case DataErrorKind::empty_receivers: return "EmptyReceivers";
        case DataErrorKind::self_receiver: return "SelfReceiver";
        case DataErrorKind::timestamp_before_origin: return "TimestampBeforeOrigin";
        case DataErrorKind::too_few_nodes: return "TooFewNodes";
        case DataErrorKind::out_of_range: return "OutOfRange";
    }
    return "DataError";
}

/// Input data violates a format rule or a record invariant.
class DataError : public std::runtime_error {
public:
    DataError(DataErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    DataErrorKind kind() const noexcept { return kind_; }

private:
    DataErrorKind kind_;
};

/// A log-density or log-posterior that must be finite is not.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hem
