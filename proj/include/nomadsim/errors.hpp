#pragma once

#include <stdexcept>
#include <string>

namespace nomadsim {

enum class ErrorCode {
    PastTime,
    UnknownTarget,
    DuplicateOpId,
    UnboundBearer,
    NoSamples,
    EmptyWindow,
    UnknownSession,
    IoError,
    ParseError,
    ValidationError,
    Internal,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::PastTime: return "PastTime";
        case ErrorCode::UnknownTarget: return "UnknownTarget";
        case ErrorCode::DuplicateOpId: return "DuplicateOpId";
        case ErrorCode::UnboundBearer: return "UnboundBearer";
        case ErrorCode::NoSamples: return "NoSamples";
        case ErrorCode::EmptyWindow: return "EmptyWindow";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::Internal: return "Internal";
    }
    return "?";
}

class SimError : public std::runtime_error {
public:
    SimError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

} // namespace nomadsim
