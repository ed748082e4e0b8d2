#include "mantra/errors.hpp"

namespace mantra {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::EmptyLabelSet: return "EmptyLabelSet";
    case ErrorCode::DuplicateSource: return "DuplicateSource";
    case ErrorCode::UnknownSource: return "UnknownSource";
    case ErrorCode::LocalIdOutOfRange: return "LocalIdOutOfRange";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::GroundTruthMasked: return "GroundTruthMasked";
    case ErrorCode::InvalidMask: return "InvalidMask";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MissingProperty: return "MissingProperty";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::DuplicateScene: return "DuplicateScene";
    case ErrorCode::UnknownScene: return "UnknownScene";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mantra
