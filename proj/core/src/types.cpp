#include "symphony/types.hpp"

#include "symphony/error.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <set>

namespace symphony {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void Question::validate() const {
  if (trim(text).empty()) {
    throw Error(ErrorCode::InvalidArgument, "question text is empty");
  }
  std::set<std::string> seen;
  for (const auto& o : options) {
    if (o.label.empty()) throw Error(ErrorCode::InvalidArgument, "option with empty label");
    if (!seen.insert(o.label).second) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("duplicate option label '{}'", o.label));
    }
  }
}

bool Question::has_label(std::string_view label) const {
  return std::any_of(options.begin(), options.end(),
                     [&](const Option& o) { return o.label == label; });
}

std::string Question::render() const {
  std::string out = text;
  for (const auto& o : options) {
    out += fmt::format("\n({}) {}", o.label, o.text);
  }
  return out;
}

std::string_view agent_name(AgentKind kind) {
  switch (kind) {
    case AgentKind::Grounding: return "Grounding Agent";
    case AgentKind::VisualPerception: return "Visual Perception Agent";
    case AgentKind::Subtitle: return "Subtitle Agent";
    case AgentKind::Terminate: return "finish";
  }
  return "finish";
}

std::optional<AgentKind> parse_agent_name(std::string_view name) {
  auto n = lower(trim(name));
  const std::string suffix = " agent";
  if (n.size() > suffix.size() && n.ends_with(suffix)) n.resize(n.size() - suffix.size());
  if (n == "grounding") return AgentKind::Grounding;
  if (n == "visual perception" || n == "perception" || n == "visual") {
    return AgentKind::VisualPerception;
  }
  if (n == "subtitle" || n == "subtitles") return AgentKind::Subtitle;
  if (n == "finish" || n == "terminate" || n == "answer" || n == "done") {
    return AgentKind::Terminate;
  }
  return std::nullopt;
}

void AgentAction::validate() const {
  if (kind != AgentKind::Terminate && trim(instruct).empty()) {
    throw Error(ErrorCode::InvalidArgument,
                fmt::format("{} action needs a non-empty instruct", agent_name(kind)));
  }
}

std::string clip_text(std::string text, std::size_t budget, bool* clipped) {
  if (clipped) *clipped = false;
  if (text.size() <= budget) return text;
  if (clipped) *clipped = true;
  if (budget <= kTruncationMarker.size()) {
    return std::string(kTruncationMarker.substr(0, budget));
  }
  std::size_t keep = budget - kTruncationMarker.size();
  // back off to the start of a UTF-8 sequence
  while (keep > 0 && (static_cast<unsigned char>(text[keep]) & 0xC0) == 0x80) --keep;
  text.resize(keep);
  text += kTruncationMarker;
  return text;
}

Observation make_observation(AgentKind source, std::string text, std::size_t budget,
                             nlohmann::json artifacts) {
  Observation o;
  o.source = source;
  o.text = clip_text(std::move(text), budget, &o.truncated);
  o.artifacts = std::move(artifacts);
  return o;
}

void Budgets::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) {
      throw Error(ErrorCode::InvalidArgument, fmt::format("budget '{}' must be positive", name));
    }
  };
  positive(inner_rounds, "inner_rounds");
  positive(tool_calls_per_agent, "tool_calls_per_agent");
  positive(reflection_rounds, "reflection_rounds");
  positive(frame_cap, "frame_cap");
  positive(segment_duration_s, "segment_duration_s");
  positive(frames_per_segment, "frames_per_segment");
  positive(scoring_concurrency, "scoring_concurrency");
  positive(clip_window_s, "clip_window_s");
  positive(clip_top_k, "clip_top_k");
  positive(observation_chars, "observation_chars");
  if (frames_per_segment > frame_cap) {
    throw Error(ErrorCode::InvalidArgument, "frames_per_segment exceeds frame_cap");
  }
  if (score_keep_min < 2 || score_keep_min > 4) {
    throw Error(ErrorCode::InvalidArgument, "score_keep_min must be 2, 3 or 4");
  }
}

void to_json(nlohmann::json& j, const Budgets& b) {
  j = nlohmann::json{
      {"inner_rounds", b.inner_rounds},
      {"tool_calls_per_agent", b.tool_calls_per_agent},
      {"reflection_rounds", b.reflection_rounds},
      {"frame_cap", b.frame_cap},
      {"segment_duration_s", b.segment_duration_s},
      {"frames_per_segment", b.frames_per_segment},
      {"scoring_concurrency", b.scoring_concurrency},
      {"clip_window_s", b.clip_window_s},
      {"clip_top_k", b.clip_top_k},
      {"score_keep_min", b.score_keep_min},
      {"observation_chars", b.observation_chars},
  };
}

void merge_budgets(const nlohmann::json& j, Budgets& b) {
  if (!j.is_object()) return;
  auto take = [&](const char* key, int& field) {
    if (auto it = j.find(key); it != j.end()) field = it->get<int>();
  };
  take("inner_rounds", b.inner_rounds);
  take("tool_calls_per_agent", b.tool_calls_per_agent);
  take("reflection_rounds", b.reflection_rounds);
  take("frame_cap", b.frame_cap);
  take("segment_duration_s", b.segment_duration_s);
  take("frames_per_segment", b.frames_per_segment);
  take("scoring_concurrency", b.scoring_concurrency);
  take("clip_window_s", b.clip_window_s);
  take("clip_top_k", b.clip_top_k);
  take("score_keep_min", b.score_keep_min);
  take("observation_chars", b.observation_chars);
}

}  // namespace symphony
