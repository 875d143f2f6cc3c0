#pragma once

#include <stdexcept>
#include <string>

namespace motiongate {

struct Error : std::runtime_error {
    Error(std::string code, const std::string& msg)
        : std::runtime_error(code + ": " + msg), code(std::move(code)) {}
    std::string code;
};

// trace-model
struct ParseError : Error {
    using Error::Error;
};
struct UnrecoverableGapError : Error {
    explicit UnrecoverableGapError(const std::string& msg) : Error("unrecoverable_gap", msg) {}
};

// preprocess
struct FilterLengthError : Error {
    explicit FilterLengthError(const std::string& msg) : Error("filter_length", msg) {}
};
struct WindowOutOfRangeError : Error {
    explicit WindowOutOfRangeError(const std::string& msg) : Error("window_out_of_range", msg) {}
};

// features / models
struct ShapeMismatchError : Error {
    explicit ShapeMismatchError(const std::string& msg) : Error("shape_mismatch", msg) {}
};
struct TooFewSamplesError : Error {
    explicit TooFewSamplesError(const std::string& msg) : Error("too_few_samples", msg) {}
};
struct ConvergenceError : Error {
    explicit ConvergenceError(const std::string& msg) : Error("non_convergence", msg) {}
};
struct ModelVersionError : Error {
    explicit ModelVersionError(const std::string& msg) : Error("model_version", msg) {}
};

// protocols
struct ProtocolError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("config", msg) {}
};

}  // namespace motiongate
