#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace symphony {

enum class ErrorCode {
  InvalidArgument,
  MalformedTimecode,
  MissingManifest,
  MalformedManifest,
  EmptyFrameSet,
  TimestampBeyondDuration,
  MalformedSubtitleFile,
  FrameLoadError,
  ConfigError,
  // transport
  Timeout,
  HttpStatus,
  RateLimited,
  Connection,
  // gateway
  FrameLimitExceeded,
  NoJsonFound,
  ScriptExhausted,
  // agents
  ToolLoopExceeded,
  GroundingParseFailure,
  SubtitleParseFailure,
  PlanningParseFailure,
  AnswerExtractionFailure,
  EpisodeAborted,
};

std::string_view to_string(ErrorCode code);

/// Base error for everything the library throws. The code is stable and
/// suitable for branching; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Failure talking to a model backend. `http_status` is 0 unless the code is
/// HttpStatus or RateLimited.
class TransportError : public Error {
 public:
  TransportError(ErrorCode code, const std::string& message, int http_status = 0)
      : Error(code, message), http_status_(http_status) {}

  int http_status() const noexcept { return http_status_; }

  // Timeouts, 429 and 5xx are worth another attempt; everything else is not.
  bool retryable() const noexcept;

 private:
  int http_status_;
};

}  // namespace symphony
