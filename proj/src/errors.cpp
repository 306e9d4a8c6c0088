#include "genread/errors.hpp"

namespace genread {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::EmptyAnswerList: return "EmptyAnswerList";
        case ErrorCode::InconsistentTaskFields: return "InconsistentTaskFields";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::RateLimited: return "RateLimited";
        case ErrorCode::MalformedResponse: return "MalformedResponse";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::TooFewVectors: return "TooFewVectors";
        case ErrorCode::NonFiniteInput: return "NonFiniteInput";
        case ErrorCode::InconsistentAssignment: return "InconsistentAssignment";
        case ErrorCode::EmptyCluster: return "EmptyCluster";
        case ErrorCode::EmptyCompletion: return "EmptyCompletion";
        case ErrorCode::Unmappable: return "Unmappable";
        case ErrorCode::EmptyRun: return "EmptyRun";
        case ErrorCode::BothEmpty: return "BothEmpty";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::InvalidTemplate: return "InvalidTemplate";
        case ErrorCode::IoError: return "IoError";
    }
    return "UnknownError";
}

}  // namespace genread
