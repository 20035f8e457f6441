#include "symphony/error.hpp"

namespace symphony {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MalformedTimecode: return "MalformedTimecode";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::EmptyFrameSet: return "EmptyFrameSet";
    case ErrorCode::TimestampBeyondDuration: return "TimestampBeyondDuration";
    case ErrorCode::MalformedSubtitleFile: return "MalformedSubtitleFile";
    case ErrorCode::FrameLoadError: return "FrameLoadError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::HttpStatus: return "HTTPStatus";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::Connection: return "Connection";
    case ErrorCode::FrameLimitExceeded: return "FrameLimitExceeded";
    case ErrorCode::NoJsonFound: return "NoJsonFound";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::ToolLoopExceeded: return "ToolLoopExceeded";
    case ErrorCode::GroundingParseFailure: return "GroundingParseFailure";
    case ErrorCode::SubtitleParseFailure: return "SubtitleParseFailure";
    case ErrorCode::PlanningParseFailure: return "PlanningParseFailure";
    case ErrorCode::AnswerExtractionFailure: return "AnswerExtractionFailure";
    case ErrorCode::EpisodeAborted: return "EpisodeAborted";
  }
  return "Unknown";
}

bool TransportError::retryable() const noexcept {
  switch (code()) {
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited:
      return true;
    case ErrorCode::HttpStatus:
      return http_status_ >= 500 && http_status_ < 600;
    default:
      return false;
  }
}

}  // namespace symphony
