#pragma once

#include <stdexcept>
#include <string>

namespace hardboost {

/// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unknown key (exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed, missing or inconsistent data (exit code 3).
class DataError : public Error {
public:
    using Error::Error;
};

/// Binary file that fails magic/version/length checks. Carries the byte offset.
class FormatError : public DataError {
public:
    FormatError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnsupportedVersionError : public FormatError {
public:
    using FormatError::FormatError;
};

/// Stored checksum does not match the payload.
class CorruptionError : public DataError {
public:
    using DataError::DataError;
};

/// Caller violated an operation's precondition (shapes, ranges, coverage).
class ContractError : public DataError {
public:
    using DataError::DataError;
};

class DimensionError : public ContractError {
public:
    using ContractError::ContractError;
};

/// Non-finite values or degenerate geometry (exit code 4).
class NumericError : public Error {
public:
    using Error::Error;
};

class DegenerateEmbeddingError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace hardboost
