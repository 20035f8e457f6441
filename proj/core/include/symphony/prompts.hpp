#pragma once

#include <map>
#include <string>
#include <string_view>

namespace symphony {

/// Prompt templates, compiled in from core/prompts/*.txt.
enum class PromptId {
  Planner,
  Reflector,
  Subtitle,
  SubtitleMerge,
  Perception,
  Grounding,
  QueryEnhance,
  VlmScoring,
  FrameInspector,
  GlobalSummary,
  MultiSegment,
  FinalAnswer,
};

inline constexpr int kPromptSchemaVersion = 1;

std::string_view prompt_name(PromptId id);
std::string_view prompt_template(PromptId id);

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Single-pass substitution of `{name}` tokens whose name is a key of `vars`.
/// Other braces, including JSON examples, pass through untouched, and
/// substituted values are never rescanned.
std::string render_template(std::string_view tmpl, const PromptVars& vars);
std::string render_prompt(PromptId id, const PromptVars& vars);

}  // namespace symphony
