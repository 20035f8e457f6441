#include "symphony/perception.hpp"

#include "symphony/error.hpp"
#include "symphony/json_extract.hpp"
#include "symphony/parallel.hpp"
#include "symphony/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cctype>
#include <numeric>

namespace symphony {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

ToolResult fault(ToolFault f, std::string text) { return ToolResult{std::move(text), f}; }

std::string string_arg(const nlohmann::json& args, const char* key) {
  auto it = args.find(key);
  if (it == args.end() || !it->is_string()) return {};
  return trim(it->get<std::string>());
}

// Accepts ["HH:MM:SS", "HH:MM:SS"] or "HH:MM:SS - HH:MM:SS".
std::optional<TimeRange> parse_range_value(const nlohmann::json& v, std::string& why) {
  std::string a;
  std::string b;
  if (v.is_array() && v.size() == 2 && v[0].is_string() && v[1].is_string()) {
    a = v[0].get<std::string>();
    b = v[1].get<std::string>();
  } else if (v.is_string()) {
    auto s = v.get<std::string>();
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '[' || c == ']'; }),
            s.end());
    const auto dash = s.find(" - ");
    const auto comma = s.find(',');
    const auto cut = dash != std::string::npos ? dash : comma;
    if (cut == std::string::npos) {
      why = "a time range must be two timestamps [\"HH:MM:SS\", \"HH:MM:SS\"]";
      return std::nullopt;
    }
    a = s.substr(0, cut);
    b = s.substr(cut + (cut == dash ? 3 : 1));
  } else {
    why = "a time range must be two timestamps [\"HH:MM:SS\", \"HH:MM:SS\"]";
    return std::nullopt;
  }
  try {
    const auto start = parse_timecode(trim(a));
    const auto end = parse_timecode(trim(b));
    if (!(start < end)) {
      why = fmt::format("time range start {} must be before end {}", format_timecode(start),
                        format_timecode(end));
      return std::nullopt;
    }
    return TimeRange(start, end);
  } catch (const Error& e) {
    why = fmt::format("{} (timestamps must be written as HH:MM:SS, e.g. 00:03:21)", e.what());
    return std::nullopt;
  }
}

std::string truncate_note(std::string text) {
  return text.empty() ? std::string("(no output)") : text;
}

}  // namespace

std::string_view tool_name(PerceptionTool t) {
  switch (t) {
    case PerceptionTool::FrameInspector: return "frame_inspector";
    case PerceptionTool::GlobalSummary: return "global_summary_tool";
    case PerceptionTool::MultiSegment: return "multi_segment_analysis_tool";
  }
  return "frame_inspector";
}

std::string_view to_string(ToolFault f) {
  switch (f) {
    case ToolFault::MalformedCall: return "MalformedCall";
    case ToolFault::RangeTooShort: return "RangeTooShort";
    case ToolFault::RangeTooLong: return "RangeTooLong";
    case ToolFault::RangeOutOfVideo: return "RangeOutOfVideo";
    case ToolFault::TooFewRanges: return "TooFewRanges";
    case ToolFault::TooManyRanges: return "TooManyRanges";
  }
  return "MalformedCall";
}

std::optional<std::string> extract_answer_marker(std::string_view reply) {
  const auto l = lower(reply);
  const auto pos = l.find("[answer]");
  if (pos == std::string::npos) return std::nullopt;
  auto rest = trim(reply.substr(pos + 8));
  if (!rest.empty() && rest.front() == ':') rest = trim(std::string_view(rest).substr(1));
  return rest;
}

std::variant<PerceptionToolCall, ToolResult> parse_perception_call(std::string_view reply) {
  nlohmann::json j;
  try {
    j = extract_json(reply);
  } catch (const Error&) {
    return fault(ToolFault::MalformedCall,
                 "error: no tool call found. Reply with exactly one JSON object "
                 "{\"tool\": ..., \"args\": {...}}, or start your reply with [answer] when done.");
  }
  const auto name = lower(string_arg(j, "tool"));
  const auto args = j.contains("args") && j["args"].is_object() ? j["args"] : nlohmann::json::object();
  PerceptionToolCall call;
  std::string why;

  if (name == "frame_inspector") {
    call.tool = PerceptionTool::FrameInspector;
    auto it = args.find("time_range");
    if (it == args.end()) {
      return fault(ToolFault::MalformedCall,
                   "error: frame_inspector needs \"time_range\": [\"HH:MM:SS\", \"HH:MM:SS\"].");
    }
    call.range = parse_range_value(*it, why);
    if (!call.range) return fault(ToolFault::MalformedCall, "error: frame_inspector " + why + ".");
    call.cue = string_arg(args, "cue");
    call.query = string_arg(args, "query");
    return call;
  }
  if (name == "global_summary_tool" || name == "global_summary") {
    call.tool = PerceptionTool::GlobalSummary;
    call.query = string_arg(args, "query");
    return call;
  }
  if (name == "multi_segment_analysis_tool" || name == "multi_segment_analysis") {
    call.tool = PerceptionTool::MultiSegment;
    auto it = args.find("time_ranges");
    if (it == args.end() || !it->is_array()) {
      return fault(ToolFault::MalformedCall,
                   "error: multi_segment_analysis_tool needs \"time_ranges\": a list of "
                   "[\"HH:MM:SS\", \"HH:MM:SS\"] pairs.");
    }
    for (const auto& v : *it) {
      auto r = parse_range_value(v, why);
      if (!r) return fault(ToolFault::MalformedCall, "error: multi_segment_analysis_tool " + why + ".");
      call.ranges.push_back(*r);
    }
    call.instruct = string_arg(args, "instruct");
    return call;
  }
  return fault(ToolFault::MalformedCall,
               fmt::format("error: unknown tool \"{}\". Available tools: frame_inspector, "
                           "global_summary_tool, multi_segment_analysis_tool.",
                           name));
}

PerceptionAgent::PerceptionAgent(ModelGateway& gateway, const Budgets& budgets)
    : gateway_(gateway), budgets_(budgets) {}

std::optional<ToolResult> PerceptionAgent::check_inspect_range(const TimeRange& range,
                                                               const FrameManifest& video) {
  const auto len = range.length_millis();
  if (range.end > video.duration()) {
    return fault(ToolFault::RangeOutOfVideo,
                 fmt::format("error: RangeOutOfVideo: {} ends after the video ends at {}. "
                             "The end time must not exceed the video duration.",
                             format_range(range), format_timecode(video.duration())));
  }
  if (len <= kInspectMinMillis) {
    return fault(ToolFault::RangeTooShort,
                 fmt::format("error: RangeTooShort: {} lasts {} s; the time range must be longer "
                             "than 10 seconds.",
                             format_range(range), len / 1000.0));
  }
  if (len > kInspectMaxMillis) {
    return fault(ToolFault::RangeTooLong,
                 fmt::format("error: RangeTooLong: {} lasts {} s; the time range must be at most "
                             "60 seconds. Break it into consecutive ranges of 60 seconds, or use "
                             "global_summary_tool for an overview.",
                             format_range(range), len / 1000.0));
  }
  return std::nullopt;
}

std::vector<Frame> PerceptionAgent::inspector_frames(const TimeRange& range, const std::string& cue,
                                                     const FrameManifest& video) {
  auto frames = sample_uniform(range, budgets_.frame_cap, video);
  if (cue.empty() || range.length_millis() <= kCueMinMillis) return frames;

  const auto pool = video.frames_in(range);
  if (pool.empty()) return frames;
  const auto cue_vec = gateway_.embed_text(cue);
  std::vector<float> sims(pool.size());
  parallel_for(pool.size(), budgets_.scoring_concurrency, [&](std::size_t i) {
    sims[i] = cosine_similarity(cue_vec, gateway_.embed_image(pool[i]));
  });
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });
  const auto extra = std::min<std::size_t>(order.size(), kCueExtraFrames);
  for (std::size_t k = 0; k < extra; ++k) frames.push_back(pool[order[k]]);

  std::sort(frames.begin(), frames.end(), [](const Frame& a, const Frame& b) { return a.at < b.at; });
  frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
  return thin_uniform(std::move(frames), budgets_.frame_cap);
}

std::vector<Frame> PerceptionAgent::summary_frames(const FrameManifest& video) const {
  return sample_uniform(video.full_range(), budgets_.frame_cap, video);
}

std::vector<LabeledFrame> PerceptionAgent::segment_frames(const std::vector<TimeRange>& ranges,
                                                          const FrameManifest& video) const {
  std::vector<LabeledFrame> out;
  if (ranges.empty()) return out;
  const int per_range = budgets_.frame_cap / static_cast<int>(ranges.size());
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    for (const auto& f : sample_uniform(ranges[k], per_range, video)) {
      out.push_back({f, fmt::format("Segment {}, frame at {}", k + 1, format_timecode(f.at))});
    }
  }
  return out;
}

ToolResult PerceptionAgent::frame_inspector(const TimeRange& range, const std::string& cue,
                                            const std::string& query, const FrameManifest& video) {
  if (auto bad = check_inspect_range(range, video)) return std::move(*bad);
  const auto frames = inspector_frames(range, cue, video);
  if (frames.empty()) {
    return {fmt::format("No frames are indexed inside {}.", format_range(range)), std::nullopt};
  }
  const auto prompt = render_prompt(
      PromptId::FrameInspector,
      {{"count", std::to_string(frames.size())},
       {"start", format_timecode(range.start)},
       {"end", format_timecode(range.end)},
       {"cue_line", cue.empty() ? std::string() : fmt::format("Look especially for: {}", cue)},
       {"query", query.empty() ? std::string("Describe the frames in detail.") : query}});
  return {truncate_note(gateway_.vision_chat("vlm_perception", prompt, frames)), std::nullopt};
}

ToolResult PerceptionAgent::global_summary(const std::string& query, const FrameManifest& video) {
  const auto frames = summary_frames(video);
  const auto prompt = render_prompt(
      PromptId::GlobalSummary,
      {{"count", std::to_string(frames.size())},
       {"duration", format_timecode(video.duration())},
       {"query", query.empty() ? std::string("Summarize the video.") : query}});
  return {truncate_note(gateway_.vision_chat("vlm_perception", prompt, frames)), std::nullopt};
}

ToolResult PerceptionAgent::multi_segment_analysis(const std::vector<TimeRange>& ranges,
                                                   const std::string& instruct,
                                                   const FrameManifest& video) {
  if (static_cast<int>(ranges.size()) < kMinSegments) {
    return fault(ToolFault::TooFewRanges,
                 fmt::format("error: TooFewRanges: multi_segment_analysis_tool needs at least {} "
                             "time ranges, got {}. Use frame_inspector for a single range.",
                             kMinSegments, ranges.size()));
  }
  if (static_cast<int>(ranges.size()) > kMaxSegments) {
    return fault(ToolFault::TooManyRanges,
                 fmt::format("error: TooManyRanges: multi_segment_analysis_tool accepts at most {} "
                             "time ranges, got {}.",
                             kMaxSegments, ranges.size()));
  }
  for (const auto& r : ranges) {
    if (r.end > video.duration()) {
      return fault(ToolFault::RangeOutOfVideo,
                   fmt::format("error: RangeOutOfVideo: {} ends after the video ends at {}.",
                               format_range(r), format_timecode(video.duration())));
    }
  }
  const auto frames = segment_frames(ranges, video);
  if (frames.empty()) {
    return {"No frames are indexed inside the requested ranges.", std::nullopt};
  }
  std::string listing;
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    listing += fmt::format("Segment {}: {}\n", k + 1, format_range(ranges[k]));
  }
  if (!listing.empty()) listing.pop_back();
  const auto prompt = render_prompt(
      PromptId::MultiSegment,
      {{"segment_count", std::to_string(ranges.size())},
       {"segments", listing},
       {"instruct", instruct.empty() ? std::string("Compare the segments.") : instruct}});
  return {truncate_note(gateway_.vision_chat("vlm_perception", prompt, frames)), std::nullopt};
}

ToolResult PerceptionAgent::execute(const PerceptionToolCall& call, const FrameManifest& video) {
  switch (call.tool) {
    case PerceptionTool::FrameInspector:
      if (!call.range) return fault(ToolFault::MalformedCall, "error: frame_inspector needs a time_range.");
      return frame_inspector(*call.range, call.cue, call.query, video);
    case PerceptionTool::GlobalSummary:
      return global_summary(call.query, video);
    case PerceptionTool::MultiSegment:
      return multi_segment_analysis(call.ranges, call.instruct, video);
  }
  return fault(ToolFault::MalformedCall, "error: unknown tool.");
}

Observation PerceptionAgent::run(const std::string& instruct, const FrameManifest& video) {
  if (trim(instruct).empty()) {
    throw Error(ErrorCode::InvalidArgument, "perception instruct must not be empty");
  }
  const auto budget = static_cast<std::size_t>(budgets_.observation_chars);
  std::vector<ChatMessage> messages{ChatMessage::user(render_prompt(
      PromptId::Perception,
      {{"instruct", instruct}, {"duration", format_timecode(video.duration())}}))};
  std::vector<std::string> results;
  int tool_calls = 0;
  int malformed_streak = 0;

  while (true) {
    const auto reply = gateway_.chat(BackendRole::VLM, "perception_agent", messages);
    if (auto answer = extract_answer_marker(reply)) {
      return make_observation(AgentKind::VisualPerception, std::move(*answer), budget);
    }
    if (tool_calls >= budgets_.tool_calls_per_agent || malformed_streak >= 2) break;
    messages.push_back(ChatMessage::assistant(reply));

    auto parsed = parse_perception_call(reply);
    ToolResult result;
    std::string tool_label = "invalid call";
    if (auto* call = std::get_if<PerceptionToolCall>(&parsed)) {
      tool_label = std::string(tool_name(call->tool));
      result = execute(*call, video);
    } else {
      result = std::get<ToolResult>(std::move(parsed));
    }
    ++tool_calls;
    malformed_streak = result.fault == ToolFault::MalformedCall ? malformed_streak + 1 : 0;
    if (result.ok()) results.push_back(fmt::format("{}: {}", tool_label, result.text));

    std::string feedback = fmt::format("Tool result ({}):\n{}", tool_label, result.text);
    if (tool_calls >= budgets_.tool_calls_per_agent || malformed_streak >= 2) {
      feedback += "\n\nNo more tool calls are available. Reply now with your summary, starting with [answer].";
    }
    messages.push_back(ChatMessage::user(std::move(feedback)));
  }

  spdlog::warn("perception agent ended without [answer] after {} tool calls", tool_calls);
  std::string partial = "Perception ended before a final answer. Partial findings:";
  if (results.empty()) partial += "\n(none)";
  for (const auto& r : results) partial += "\n" + r;
  auto obs = make_observation(AgentKind::VisualPerception, std::move(partial), budget);
  obs.truncated = true;
  return obs;
}

}  // namespace symphony
