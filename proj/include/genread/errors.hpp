#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace genread {

enum class ErrorCode {
    // datamodel / dataset loading
    MissingField,
    EmptyAnswerList,
    InconsistentTaskFields,
    ParseError,
    // llm backend
    TransportError,
    RateLimited,
    MalformedResponse,
    DimensionMismatch,
    // clustering
    TooFewVectors,
    NonFiniteInput,
    InconsistentAssignment,
    EmptyCluster,
    // reader
    EmptyCompletion,
    // evaluation
    Unmappable,
    EmptyRun,
    // pipeline
    BothEmpty,
    InvalidConfig,
    InvalidTemplate,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Error type carried by every throwing operation in the toolkit.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// True for errors the backend retry loop is allowed to retry.
    bool retryable() const noexcept {
        return code_ == ErrorCode::TransportError || code_ == ErrorCode::RateLimited;
    }

private:
    ErrorCode code_;
};

}  // namespace genread
