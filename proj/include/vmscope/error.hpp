#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vmscope {

enum class ErrorCode {
  InvalidArgument,
  UnsupportedChannels,
  OutOfBounds,
  DimensionMismatch,
  TooSmall,
  NoOverlap,
  DidNotConverge,
  Degenerate,
  InsufficientMatches,
  NoConsensus,
  CanvasLimitExceeded,
  BackendFailure,
  MissingGroundTruth,
  ViewportLargerThanSlide,
  IoError,
  ProtocolError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vmscope
