#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mantra {

enum class ErrorCode {
  InvalidLabel,
  DuplicateLabel,
  EmptyLabelSet,
  DuplicateSource,
  UnknownSource,
  LocalIdOutOfRange,
  DimensionMismatch,
  ParseError,
  ZeroVector,
  GroundTruthMasked,
  InvalidMask,
  IdOutOfRange,
  EmptyMatrix,
  EmptyScene,
  ConfigInvalid,
  IoError,
  MissingProperty,
  EmptyManifest,
  DuplicateScene,
  UnknownScene,
  VersionMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (CLI, HTTP service, tests) can branch on the kind of error.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace mantra
