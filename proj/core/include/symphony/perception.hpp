#pragma once

#include "symphony/gateway.hpp"
#include "symphony/media.hpp"
#include "symphony/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace symphony {

enum class PerceptionTool { FrameInspector, GlobalSummary, MultiSegment };

std::string_view tool_name(PerceptionTool t);

/// One parsed tool request from the perception loop.
struct PerceptionToolCall {
  PerceptionTool tool = PerceptionTool::GlobalSummary;
  std::optional<TimeRange> range;   // FrameInspector
  std::string cue;                  // FrameInspector, optional
  std::string query;                // FrameInspector / GlobalSummary, optional
  std::vector<TimeRange> ranges;    // MultiSegment
  std::string instruct;             // MultiSegment
};

/// Constraint violations a tool reports back to the model instead of throwing.
enum class ToolFault {
  MalformedCall,
  RangeTooShort,
  RangeTooLong,
  RangeOutOfVideo,
  TooFewRanges,
  TooManyRanges,
};

std::string_view to_string(ToolFault f);

struct ToolResult {
  std::string text;
  std::optional<ToolFault> fault;

  bool ok() const { return !fault; }
};

/// Parses `{"tool": ..., "args": {...}}` out of a model reply. On failure the
/// returned result carries MalformedCall and a message the model can act on.
std::variant<PerceptionToolCall, ToolResult> parse_perception_call(std::string_view reply);

inline constexpr std::int64_t kInspectMinMillis = 10'000;
inline constexpr std::int64_t kInspectMaxMillis = 60'000;
inline constexpr std::int64_t kCueMinMillis = 30'000;
inline constexpr int kCueExtraFrames = 10;
inline constexpr int kMinSegments = 2;
inline constexpr int kMaxSegments = 6;

/// Returns the text after the first case-insensitive `[answer]`, trimmed.
std::optional<std::string> extract_answer_marker(std::string_view reply);

/// Appendix-style perception: a tool loop over dense inspection of a short
/// range, a whole-video overview and a multi-range comparison.
class PerceptionAgent {
 public:
  PerceptionAgent(ModelGateway& gateway, const Budgets& budgets);

  /// Runs until the model replies with `[answer]`. After
  /// tool_calls_per_agent tool calls the model gets one last turn to answer;
  /// if it still does not, the observation is a partial summary flagged
  /// truncated.
  Observation run(const std::string& instruct, const FrameManifest& video);

  ToolResult execute(const PerceptionToolCall& call, const FrameManifest& video);

  ToolResult frame_inspector(const TimeRange& range, const std::string& cue,
                             const std::string& query, const FrameManifest& video);
  ToolResult global_summary(const std::string& query, const FrameManifest& video);
  ToolResult multi_segment_analysis(const std::vector<TimeRange>& ranges,
                                    const std::string& instruct, const FrameManifest& video);

  /// Frame selection behind each tool, exposed for inspection. These make
  /// embedding calls (cue path) but no chat calls.
  std::vector<Frame> inspector_frames(const TimeRange& range, const std::string& cue,
                                      const FrameManifest& video);
  std::vector<Frame> summary_frames(const FrameManifest& video) const;
  std::vector<LabeledFrame> segment_frames(const std::vector<TimeRange>& ranges,
                                           const FrameManifest& video) const;

  /// Error message for a range frame_inspector would reject, if any.
  static std::optional<ToolResult> check_inspect_range(const TimeRange& range,
                                                       const FrameManifest& video);

 private:
  ModelGateway& gateway_;
  Budgets budgets_;
};

}  // namespace symphony
