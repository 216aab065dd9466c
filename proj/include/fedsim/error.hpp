#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- trace ---
struct MalformedLine : Error {
    int line_no;
    explicit MalformedLine(int line)
        : Error("malformed trace line " + std::to_string(line)), line_no(line) {}
};
struct EmptyTrace : Error {
    EmptyTrace() : Error("trace contains no valid samples") {}
};
struct NonMonotonicTime : Error {
    int line_no;
    explicit NonMonotonicTime(int line)
        : Error("non-monotonic timestamp at trace line " + std::to_string(line)), line_no(line) {}
};
struct EmptyInput : Error {
    EmptyInput() : Error("empty client or trace set") {}
};
struct StalledTransfer : Error {
    StalledTransfer() : Error("transfer stalled on zero-bandwidth plateau") {}
};

// --- predictor ---
struct EmptyHistory : Error {
    EmptyHistory() : Error("bandwidth history is empty") {}
};
struct EmptyCohort : Error {
    EmptyCohort() : Error("cohort is empty") {}
};
struct TraceTooShort : Error {
    TraceTooShort() : Error("trace too short for prediction-error evaluation") {}
};

// --- learner ---
struct InvalidConfig : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    NonFiniteLoss() : Error("local training diverged (non-finite loss)") {}
};
struct DimensionMismatch : Error {
    DimensionMismatch() : Error("parameter vector dimensions do not match") {}
};

// --- selection ---
struct InvalidInput : Error {
    using Error::Error;
};
struct CohortTooLarge : Error {
    CohortTooLarge() : Error("requested cohort exceeds population size") {}
};

// --- scheduler ---
struct UnknownClient : Error {
    explicit UnknownClient(const std::string& id) : Error("unknown client: " + id) {}
};
struct WindowNotComplete : Error {
    WindowNotComplete() : Error("observation window not complete") {}
};
struct InvalidPrediction : Error {
    InvalidPrediction() : Error("normalized prediction outside [0,1]") {}
};
struct NonPositiveFactor : Error {
    NonPositiveFactor() : Error("feedback factor must be positive") {}
};
struct InvalidDuration : Error {
    InvalidDuration() : Error("round duration must be positive") {}
};

// --- engine ---
struct AllClientsDropped : Error {
    int round;
    explicit AllClientsDropped(int r)
        : Error("every cohort client stalled in round " + std::to_string(r)), round(r) {}
};

// --- cli ---
struct ConfigError : Error {
    using Error::Error;
};
struct ParseError : ConfigError {
    using ConfigError::ConfigError;
};
struct ValidationError : ConfigError {
    ValidationError(const std::string& field, const std::string& reason)
        : ConfigError("invalid config field '" + field + "': " + reason) {}
};
struct UnknownKey : ConfigError {
    explicit UnknownKey(const std::string& key) : ConfigError("unknown config key: " + key) {}
};

} // namespace fedsim
